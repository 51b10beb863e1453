"""Central finite-difference gradient oracle.

Independent of autograd: perturbs one tensor entry at a time and re-evaluates
the loss. Meant for small double-precision problems; comparisons use relative
error with an absolute floor for near-zero gradients.
"""

import numpy as np
import torch

REL_TOL = 1e-3
ABS_FLOOR = 1e-7


def central_difference(loss_fn, tensor: torch.Tensor, flat_index: int, h: float = 1e-6) -> float:
    """d loss / d tensor[flat_index] by central differences; restores the entry."""
    flat = tensor.detach().reshape(-1)
    original = flat[flat_index].item()
    with torch.no_grad():
        flat[flat_index] = original + h
        plus = float(loss_fn())
        flat[flat_index] = original - h
        minus = float(loss_fn())
        flat[flat_index] = original
    return (plus - minus) / (2.0 * h)


def compare_gradients(loss_fn, tensors, n_samples, seed, h: float = 1e-6):
    """Check autograd gradients of ``loss_fn`` w.r.t. entries of ``tensors``.

    Samples ``n_samples`` coordinates across all tensors (all of them if the
    total is smaller). Returns (checked, max_rel_err); raises AssertionError
    on the first disagreement.
    """
    tensors = list(tensors)
    for t in tensors:
        t.grad = None
    loss = loss_fn()
    loss.backward()
    grads = [t.grad.detach().clone().reshape(-1) for t in tensors]

    coords = [(i, j) for i, t in enumerate(tensors) for j in range(t.numel())]
    rng = np.random.default_rng(seed)
    if n_samples < len(coords):
        picked = rng.choice(len(coords), size=n_samples, replace=False)
        coords = [coords[int(k)] for k in picked]

    max_rel = 0.0
    for ti, j in coords:
        fd = central_difference(loss_fn, tensors[ti], j, h=h)
        an = grads[ti][j].item()
        denom = max(abs(fd), abs(an))
        if denom < ABS_FLOOR:
            continue
        rel = abs(fd - an) / denom
        assert rel < REL_TOL, (
            f"gradient mismatch at tensor {ti} entry {j}: fd={fd:.8e} autograd={an:.8e} "
            f"rel={rel:.3e}"
        )
        max_rel = max(max_rel, rel)
    return len(coords), max_rel


def module_gradients_match(module: torch.nn.Module, loss_fn, n_samples: int, seed: int):
    """Convenience wrapper over all parameters of a module."""
    return compare_gradients(loss_fn, list(module.parameters()), n_samples, seed)
