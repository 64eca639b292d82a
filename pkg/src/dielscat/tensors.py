# Complex 3-vector / 3x3-dyadic helpers and the Helmholtz kernel family:
# the scalar kernel Phi_k(x,z) = e^{ik|x-z|}/(4pi|x-z|), its gradient, and
# the dyadic kernel Y_k(x,z) = grad grad Phi_k + k^2 Phi_k I.

import numpy as np

FOUR_PI = 4.0 * np.pi

# distances below this are treated as coincident points
COINCIDENT_TOL = 1e-12


def vec3(x, y, z):
    """Build a complex 3-vector."""
    return np.array([x, y, z], dtype=complex)


def identity_dyadic():
    """3x3 complex identity."""
    return np.eye(3, dtype=complex)


def vnorm(v):
    """Euclidean norm of a complex vector."""
    return float(np.linalg.norm(v))


def spectral_norm(dyadic):
    """Largest singular value of a 3x3 tensor."""
    return float(np.linalg.norm(dyadic, 2))


def helmholtz_kernel(x, z, k):
    """Scalar outgoing Helmholtz kernel e^{ikr}/(4 pi r) with r = |x-z|."""
    r = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(z, dtype=float))
    if r < COINCIDENT_TOL:
        raise ValueError("helmholtz_kernel: coincident evaluation points")
    return np.exp(1j * k * r) / (FOUR_PI * r)


def grad_helmholtz_kernel(x, z, k):
    """Gradient in x of the scalar kernel: Phi'(r) * rhat."""
    dx = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
    r = np.linalg.norm(dx)
    if r < COINCIDENT_TOL:
        raise ValueError("grad_helmholtz_kernel: coincident evaluation points")
    phi = np.exp(1j * k * r) / (FOUR_PI * r)
    dphi = phi * (1j * k - 1.0 / r)
    return dphi * (dx / r)


def dyadic_green(x, z, k):
    """Dyadic kernel Y_k(x,z) = grad grad Phi_k + k^2 Phi_k I.

    Closed form in r = |x-z| and rhat = (x-z)/r:
        Y_k = (Phi'' - Phi'/r) rhat rhat + (Phi'/r + k^2 Phi) I
    with Phi' = Phi (ik - 1/r) and Phi'' = Phi ((ik - 1/r)^2 + 1/r^2).
    """
    dx = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
    r = np.linalg.norm(dx)
    if r < COINCIDENT_TOL:
        raise ValueError("dyadic_green: coincident evaluation points")
    phi = np.exp(1j * k * r) / (FOUR_PI * r)
    s = 1j * k - 1.0 / r
    dphi = phi * s
    ddphi = phi * (s * s + 1.0 / r ** 2)
    rhat = dx / r
    radial = ddphi - dphi / r
    iso = dphi / r + k * k * phi
    return radial * np.outer(rhat, rhat) + iso * np.eye(3)


def dyadic_green_fd(x, z, k, step=1e-4):
    """Finite-difference oracle for grad grad Phi_k + k^2 Phi_k I.

    Second-order central differences of the scalar kernel; kept as a
    permanent test fixture for the closed form above.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((3, 3), dtype=complex)
    phi0 = helmholtz_kernel(x, z, k)
    for a in range(3):
        for b in range(3):
            ea = np.zeros(3)
            eb = np.zeros(3)
            ea[a] = step
            eb[b] = step
            if a == b:
                pp = helmholtz_kernel(x + ea, z, k)
                mm = helmholtz_kernel(x - ea, z, k)
                out[a, b] = (pp - 2.0 * phi0 + mm) / step ** 2
            else:
                pp = helmholtz_kernel(x + ea + eb, z, k)
                pm = helmholtz_kernel(x + ea - eb, z, k)
                mp = helmholtz_kernel(x - ea + eb, z, k)
                mm = helmholtz_kernel(x - ea - eb, z, k)
                out[a, b] = (pp - pm - mp + mm) / (4.0 * step ** 2)
    return out + k * k * phi0 * np.eye(3)


def dyadic_kernel_scalars(targets, sources, k, out_iso=None, out_rad=None):
    """Scalar factors of Y_k for all target/source pairs.

    Returns (iso, rad2) with Y_k(x_i, z_j) = iso[i,j] I + rad2[i,j] d d^T
    where d = x_i - z_j (unnormalized).  Pairs closer than the coincidence
    tolerance get zero entries; callers handle self terms separately.
    """
    tx = np.asarray(targets, dtype=float)
    sx = np.asarray(sources, dtype=float)
    d = tx[:, None, :] - sx[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    r = np.sqrt(r2)
    near = r < COINCIDENT_TOL
    r_safe = np.where(near, 1.0, r)
    phi = np.exp(1j * k * r) / (FOUR_PI * r_safe)
    s = 1j * k - 1.0 / r_safe
    dphi = phi * s
    ddphi = phi * (s * s + 1.0 / r_safe ** 2)
    iso = dphi / r_safe + k * k * phi
    rad2 = (ddphi - dphi / r_safe) / np.where(near, 1.0, r2)
    iso[near] = 0.0
    rad2[near] = 0.0
    if out_iso is not None:
        out_iso[...] = iso
        out_rad[...] = rad2
        return out_iso, out_rad
    return iso, rad2


def dyadic_sum_chunked(targets, sources, k, fields, weights=None,
                       chunk=512):
    """Y = sum_j w_j Y_k(x_i, z_j) . F_j with on-the-fly kernel evaluation.

    Memory stays O(chunk * n_sources); coincident pairs (self terms) are
    skipped.  fields has shape (n_sources, 3).
    """
    tx = np.asarray(targets, dtype=float)
    sx = np.asarray(sources, dtype=float)
    F = np.asarray(fields, dtype=complex)
    if weights is not None:
        F = F * np.asarray(weights, dtype=float)[:, None]
    out = np.empty((tx.shape[0], 3), dtype=complex)
    for lo in range(0, tx.shape[0], chunk):
        hi = min(lo + chunk, tx.shape[0])
        d = tx[lo:hi, None, :] - sx[None, :, :]
        iso, rad2 = dyadic_kernel_scalars(tx[lo:hi], sx, k)
        dF = np.einsum("ijk,jk->ij", d, F)
        out[lo:hi] = iso @ F + np.einsum("ij,ijk->ik", rad2 * dF, d)
    return out


def direction_grid():
    """26 unit directions: 6 axes, 8 cube diagonals, 12 edge midpoints."""
    dirs = []
    for a in range(3):
        for s in (1.0, -1.0):
            v = np.zeros(3)
            v[a] = s
            dirs.append(v)
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            for sz in (1.0, -1.0):
                dirs.append(np.array([sx, sy, sz]) / np.sqrt(3.0))
    for a in range(3):
        b = (a + 1) % 3
        for sa in (1.0, -1.0):
            for sb in (1.0, -1.0):
                v = np.zeros(3)
                v[a] = sa
                v[b] = sb
                dirs.append(v / np.sqrt(2.0))
    return np.array(dirs)


def refine_direction_grid(directions):
    """Double a direction set by adding normalized pairwise midpoints."""
    dirs = [np.asarray(v, dtype=float) for v in directions]
    extra = []
    n = len(dirs)
    for i in range(n):
        v = dirs[i] + dirs[(i + 1) % n]
        nv = np.linalg.norm(v)
        if nv > 1e-9:
            extra.append(v / nv)
    return np.array(dirs + extra)
