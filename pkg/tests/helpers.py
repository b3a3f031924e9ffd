import numpy as np

from roster_lab.driver import UniformStream


class ZeroRng:
    """Uniform source that always returns 0, so samplers take the first rows of a block."""

    def random(self, k):
        return np.zeros(k)


def zero_stream():
    return UniformStream(ZeroRng())


# worked example: four routes, one stage, minutes as the time unit
EX_ADVERTISED = np.array([8.0, 12.0, 9.5, 14.0])
EX_DRIVER = np.array([10.0, 11 / 1.125, 9 / 1.125, 20.0])
