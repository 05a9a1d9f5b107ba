"""
Contains code for optional dependencies.
"""

import importlib
from functools import wraps
from typing import Any, Callable

# Extra that provides each optional module
EXTRAS: dict[str, str] = {"pandas": "data"}


def module_exists(module_name: str) -> bool:
    """Determines whether or not a module exists."""
    try:
        importlib.import_module(module_name)
        return True
    except ImportError:
        return False


def requires_modules(*dependencies: str) -> Callable[[Callable], Callable]:
    """Raises an exception if any of the specified modules are not installed.

    The message names the package extra that installs the missing modules.
    """

    def decorator(function: Callable) -> Callable:
        @wraps(function)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            if missing := [d for d in dependencies if not module_exists(d)]:
                extras = sorted({EXTRAS.get(d, d) for d in missing})
                raise ModuleNotFoundError(
                    f"{function.__name__} requires {', '.join(missing)}; "
                    f"install forgetfree[{','.join(extras)}]"
                )
            return function(*args, **kwargs)

        return wrapper

    return decorator
