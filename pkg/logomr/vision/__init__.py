from .mip import GRAY_LEVELS, ProjectionImage, to_gray8, write_mips


__all__ = ["GRAY_LEVELS", "ProjectionImage", "to_gray8", "write_mips"]
