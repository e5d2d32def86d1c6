"""Steady state and dynamics of the giver-scheme wealth exchange model."""

__version__ = "0.1.0"

_ESTIMATORS = ("GiverSteadyState", "GiverSchemeSimulator", "AsymmetricRandomWalk")
__all__ = list(_ESTIMATORS)


def __getattr__(name):
    # estimators pull in scikit-learn, so load them on first use
    if name in _ESTIMATORS:
        from . import estimators
        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
