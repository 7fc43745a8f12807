"""Backend selection for the hot kernels.

The compiled extension ``mopde._kernels`` is used when it imports and
``MOPDE_PURE_PYTHON`` is unset; otherwise the numpy implementations in
``mopde._pykernels`` are used.  ``BACKEND`` names the active choice.
"""
import os

from . import _pykernels

python_backend = _pykernels
compiled_backend = None

if not os.environ.get("MOPDE_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if _active is compiled_backend else "python"

legendre_power_sum = _active.legendre_power_sum
radial_power_flux = _active.radial_power_flux
radial_power_jacobian = _active.radial_power_jacobian


def backends():
    """Available backend modules keyed by name."""
    out = {"python": python_backend}
    if compiled_backend is not None:
        out["cython"] = compiled_backend
    return out
