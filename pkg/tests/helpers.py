"""Random fixtures shared by the test modules."""

import numpy as np

from weakmeas.qcore import Observable, make_state


def random_state(rng, dim):
    return make_state(rng.normal(size=dim) + 1j * rng.normal(size=dim))


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng, dim, scale=1.0):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return Observable(scale * (z + z.conj().T) / 2)


def observable_with_spectrum(rng, eigenvalues):
    u = random_unitary(rng, len(eigenvalues))
    return Observable(u @ np.diag(eigenvalues) @ u.conj().T)
