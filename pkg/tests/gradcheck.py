"""Central finite-difference gradient checking, independent of autograd."""

import torch


def fd_gradients(loss_fn, params, h=1e-4):
    """Central differences per scalar parameter, evaluated in the params' dtype."""
    grads = []
    with torch.no_grad():
        for p in params:
            g = torch.zeros_like(p.data)
            flat, gflat = p.data.view(-1), g.view(-1)
            for i in range(flat.numel()):
                orig = float(flat[i])
                flat[i] = orig + h
                up = float(loss_fn())
                flat[i] = orig - h
                down = float(loss_fn())
                flat[i] = orig
                gflat[i] = (up - down) / (2.0 * h)
            grads.append(g)
    return grads


def analytic_gradients(loss_fn, params):
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    return [p.grad.detach().clone() for p in params]


def relative_error(a, b):
    denom = max(float(a.norm()), float(b.norm()), 1e-12)
    return float((a - b).norm()) / denom


def max_relative_error(loss_fn, params, h=1e-4):
    analytic = analytic_gradients(loss_fn, params)
    numeric = fd_gradients(loss_fn, params, h)
    return max(relative_error(a, n) for a, n in zip(analytic, numeric))
