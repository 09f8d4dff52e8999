import statistics
import time


class Timer:
    def __init__(self):
        self._started_time = None
        self._last_tap_time = None
        self._laps: list[float] = []
        self.reset()

    def reset(self):
        self._started_time = time.perf_counter()
        self._last_tap_time = self._started_time
        self._laps = []

    def tap(self, since_last: bool = False) -> float:
        now_time = time.perf_counter()
        since_time = self._last_tap_time if since_last else self._started_time
        self._last_tap_time = now_time
        elapsed = now_time - since_time
        if since_last:
            self._laps.append(elapsed)
        return elapsed

    @property
    def laps(self) -> list[float]:
        return list(self._laps)

    def median_lap(self) -> float:
        if not self._laps:
            raise ValueError("no laps recorded")
        return statistics.median(self._laps)
