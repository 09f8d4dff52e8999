from .volume import Volume, Plane, ALL_PLANES, VOLUME_MAGIC, load_volume, save_volume, decode_volume, reslice, restack
from .bag import SliceBag, stack_neighbors, make_bag
from .preprocess import AugmentationPolicy, normalize_volume, resample_trilinear, zscore, translate, augment


__all__ = [
    "Volume", "Plane", "ALL_PLANES", "VOLUME_MAGIC", "load_volume", "save_volume", "decode_volume", "reslice", "restack",
    "SliceBag", "stack_neighbors", "make_bag",
    "AugmentationPolicy", "normalize_volume", "resample_trilinear", "zscore", "translate", "augment",
]
