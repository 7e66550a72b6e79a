"""All-in-one image restoration toolkit.

Gated channel-attention transformer blocks plus prior-guided per-pixel
mixture-of-experts, built on a from-scratch float32 autodiff engine.
Kept import-light so the CLI can pin BLAS thread counts before numpy loads.
"""

__version__ = "0.1.0"

_LAZY = {
    "Tensor": "autodiff",
    "Parameter": "autodiff",
    "Module": "autodiff",
    "backward": "autodiff",
    "no_grad": "autodiff",
    "finite_diff_check": "autodiff",
    "ModelConfig": "model",
    "RestorationNet": "model",
    "TrainConfig": "train",
}


def __getattr__(name):
    if name in _LAZY:
        import importlib

        mod = importlib.import_module(f".{_LAZY[name]}", __name__)
        return getattr(mod, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
