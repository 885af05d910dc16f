import numpy as np


class SearchCallback(object):
    """
    Base class for observers of the Newton searches for stationary points.
    """

    def callback(self, z: np.ndarray, iteration: int, residual_norm: float) -> None:
        """
        Called once per Newton iteration with the current iterate and the norm of its residual.
        """
        pass


class CountCallback(SearchCallback):
    """
    Counts Newton iterations and Newton runs, and keeps the largest residual seen at the start of a run.
    """

    def __init__(self):
        self.counter = 0
        self.starts = 0
        self.max_initial_residual = 0.0

    def callback(self, z: np.ndarray, iteration: int, residual_norm: float) -> None:
        self.counter += 1
        if iteration == 0:
            self.starts += 1
            self.max_initial_residual = max(self.max_initial_residual, float(residual_norm))
