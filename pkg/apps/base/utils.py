import logging
import math
import typing
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from django.conf import settings

KAHAN_SUMMATION = settings.NLSLAB_KAHAN_SUMMATION

logger = logging.getLogger(__name__)


def get_error_message(error: Exception) -> str:
    """Obtains the error message for an Exception.

    Procedure:
    1. See if exception has a 'message' attribute. If yes, return that.
    2. Otherwise simply return `str(error)`
    """
    return getattr(error, "message", str(error))


def get_error_messages(error: Exception) -> typing.List[str]:
    """An extension to the `get_error_message` util.
    Sometimes some errors (specifically Django `ValidationError`s) may return
    a list of error messages instead of a single message.

    This method handles both the cases and returns a list of error(s).
    """
    return getattr(error, "messages", [get_error_message(error)])


def weighted_sum(weights: np.ndarray, values: np.ndarray) -> float:
    """
    Quadrature sum `sum(w_i * f_i)`.

    Uses a plain dot product unless NLSLAB_KAHAN_SUMMATION is set, in which
    case the products are accumulated with `math.fsum` (correctly rounded).
    """
    if KAHAN_SUMMATION:
        return math.fsum(np.asarray(weights * values, dtype=float).tolist())
    return float(np.dot(weights, values))


def frozen(array: typing.Any, dtype=float) -> np.ndarray:
    """Returns a read-only copy of `array`"""
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def map_keyed(
    func: typing.Callable[[typing.Any], typing.Any],
    keys: typing.Sequence[typing.Any],
    threads: int = 1,
) -> typing.Dict[typing.Any, typing.Any]:
    """
    Evaluates `func` at every key and returns `{key: func(key)}`.

    With `threads > 1` the calls are dispatched to a thread pool. Results
    are keyed by their input, so the assembled mapping does not depend on
    completion order.

    Parameters:
    * func {Callable}: Pure function of one sweep coordinate
    * keys {Sequence}: Hashable sweep coordinates
    * threads {int}: Worker count; 1 runs sequentially in the caller

    Returns:
    * results {Dict}: Insertion-ordered like `keys`
    """
    if threads <= 1 or len(keys) <= 1:
        return {key: func(key) for key in keys}

    logger.debug(f"Dispatching {len(keys)} sweep points to {threads} workers")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {key: pool.submit(func, key) for key in keys}
        return {key: futures[key].result() for key in keys}
