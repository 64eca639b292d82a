# Periodic cluster construction inside a box or ball domain, the scaling
# relations tying particle size, contrast, dilution and wavenumber together,
# and the counting-sum diagnostics used by the regression studies.

import json

import numpy as np

H_LOW = 9.0 / 11.0
H_HIGH = 1.0


class DomainShape:
    """Axis-aligned box or ball; extents are side lengths or the radius."""

    def __init__(self, kind, extents, center=(0.0, 0.0, 0.0)):
        if kind not in ("box", "ball"):
            raise ValueError("domain kind must be 'box' or 'ball'")
        self.kind = kind
        self.center = np.asarray(center, dtype=float)
        if kind == "box":
            self.extents = np.asarray(extents, dtype=float)
            if self.extents.shape != (3,) or np.any(self.extents <= 0):
                raise ValueError("box needs three positive side lengths")
            self.radius = None
        else:
            self.radius = float(extents)
            if self.radius <= 0:
                raise ValueError("ball radius must be positive")
            self.extents = None

    def volume(self):
        if self.kind == "box":
            return float(np.prod(self.extents))
        return 4.0 * np.pi * self.radius ** 3 / 3.0

    def diameter(self):
        if self.kind == "box":
            return float(np.linalg.norm(self.extents))
        return 2.0 * self.radius

    def min_extent(self):
        if self.kind == "box":
            return float(np.min(self.extents))
        return 2.0 * self.radius

    def contains(self, pts):
        """Boolean mask of points inside the domain."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float)) - self.center
        if self.kind == "box":
            half = self.extents / 2.0
            return np.all(np.abs(pts) <= half + 1e-12, axis=1)
        return np.einsum("ij,ij->i", pts, pts) <= self.radius ** 2 + 1e-12

    def to_dict(self):
        if self.kind == "box":
            return {"kind": "box", "extents": list(self.extents),
                    "center": list(self.center)}
        return {"kind": "ball", "radius": self.radius,
                "center": list(self.center)}

    @staticmethod
    def from_dict(doc):
        if doc["kind"] == "box":
            return DomainShape("box", doc["extents"], doc.get("center", (0, 0, 0)))
        return DomainShape("ball", doc["radius"], doc.get("center", (0, 0, 0)))


def unit_box():
    """Unit-volume box [0,1]^3."""
    return DomainShape("box", (1.0, 1.0, 1.0), center=(0.5, 0.5, 0.5))


def unit_ball():
    """Ball of radius 1 at the origin."""
    return DomainShape("ball", 1.0)


class ScaleSet:
    """Consistent bundle of asymptotic parameters.

    Holds a (particle scale), h (regime exponent), eta0 (contrast prefactor),
    c0 (frequency offset constant), sign (+1 or -1 branch of the resonance
    condition), c_r (dilution), lambda_b (reference Newtonian eigenvalue of
    the particle shape) and the derived eta, d, k.
    """

    def __init__(self, a, h, eta0, c0, sign, c_r, lambda_b, eta, d, k):
        self.a = a
        self.h = h
        self.eta0 = eta0
        self.c0 = c0
        self.sign = sign
        self.c_r = c_r
        self.lambda_b = lambda_b
        self.eta = eta
        self.d = d
        self.k = k

    def check(self, rtol=1e-12):
        """Verify the defining scaling identities."""
        assert abs(self.eta - self.eta0 * self.a ** -2) <= rtol * self.eta
        assert abs(self.d ** 3 - self.c_r ** 3 * self.a ** (3 - self.h)) \
            <= rtol * self.d ** 3
        ksq = (1.0 - self.sign * self.c0 * self.a ** self.h) \
            / (self.eta0 * self.lambda_b)
        assert abs(self.k ** 2 - ksq) <= rtol * abs(ksq)

    def to_dict(self):
        return {"a": self.a, "h": self.h, "eta0": self.eta0, "c0": self.c0,
                "sign": "+" if self.sign > 0 else "-", "c_r": self.c_r,
                "lambda_b": self.lambda_b, "eta": self.eta, "d": self.d,
                "k": self.k}


def parse_sign(sign):
    """Map '+'/'-' (or +-1) to the +1/-1 branch value."""
    if sign in ("+", 1, 1.0):
        return 1.0
    if sign in ("-", -1, -1.0):
        return -1.0
    raise ValueError("sign must be '+' or '-'")


def derive_scales(a, h, eta0, c0, sign, c_r, lambda_b):
    """Build the unique consistent ScaleSet from the free parameters.

    eta = eta0 a^-2, d^3 = c_r^3 a^{3-h}, and the resonance-offset condition
    1 - k^2 eta a^2 lambda_b = (sign) c0 a^h fixes k.
    """
    if not (0.0 < a < 1.0):
        raise ValueError("a must lie in (0, 1)")
    if not (H_LOW < h < H_HIGH):
        raise ValueError("h must lie in (9/11, 1)")
    for name, val in (("eta0", eta0), ("c0", c0), ("c_r", c_r),
                      ("lambda_b", lambda_b)):
        if val <= 0:
            raise ValueError("%s must be positive" % name)
    s = parse_sign(sign)
    ksq = (1.0 - s * c0 * a ** h) / (eta0 * lambda_b)
    if ksq <= 0:
        raise ValueError("infeasible regime: frequency offset c0 a^h >= 1")
    return ScaleSet(a=a, h=h, eta0=eta0, c0=c0, sign=s, c_r=c_r,
                    lambda_b=lambda_b, eta=eta0 * a ** -2,
                    d=c_r * a ** ((3.0 - h) / 3.0), k=np.sqrt(ksq))


class Cluster:
    """Periodic cluster: cube centers z_m, pitch d, and the domain."""

    def __init__(self, centers, d, domain):
        self.centers = np.asarray(centers, dtype=float)
        self.d = float(d)
        self.domain = domain
        self.count = self.centers.shape[0]

    def to_json(self):
        return json.dumps({"domain": self.domain.to_dict(), "d": self.d,
                           "centers": self.centers.tolist()})

    @staticmethod
    def from_json(text):
        doc = json.loads(text)
        return Cluster(doc["centers"], doc["d"],
                       DomainShape.from_dict(doc["domain"]))


def generate_cluster(domain, d):
    """Centers of all side-d lattice cubes whose closure lies inside the domain.

    The lattice is anchored at the box's minimum corner, or at the ball's
    center; partial cubes at the boundary are discarded.
    """
    if d <= 0:
        raise ValueError("pitch d must be positive")
    if d > domain.min_extent():
        raise ValueError("pitch d exceeds the domain extent")
    if domain.kind == "box":
        counts = np.floor(domain.extents / d + 1e-12).astype(int)
        corner = domain.center - domain.extents / 2.0
        axes = [corner[i] + d * (np.arange(counts[i]) + 0.5) for i in range(3)]
        grid = np.meshgrid(*axes, indexing="ij")
        centers = np.stack([g.ravel() for g in grid], axis=1)
    else:
        half = int(np.ceil(domain.radius / d)) + 1
        idx = np.arange(-half, half + 1)
        grid = np.meshgrid(idx, idx, idx, indexing="ij")
        centers = domain.center + d * (np.stack(
            [g.ravel() for g in grid], axis=1) + 0.5)
        # keep a cube iff its farthest vertex is still inside the ball
        rel = centers - domain.center
        vertex_r = np.linalg.norm(np.abs(rel) + d / 2.0, axis=1)
        centers = centers[vertex_r <= domain.radius + 1e-12]
    if centers.shape[0] == 0:
        raise ValueError("no particle cube fits inside the domain")
    return Cluster(centers, d, domain)


def counting_sum(cluster, exponent, m):
    """sum_{j != m} |z_j - z_m|^{-exponent}."""
    diffs = cluster.centers - cluster.centers[m]
    r = np.linalg.norm(diffs, axis=1)
    r = r[r > 0]
    return float(np.sum(r ** (-float(exponent))))


def max_counting_sum(cluster, exponent):
    """Worst-case counting sum over all centers."""
    return max(counting_sum(cluster, exponent, m)
               for m in range(cluster.count))


def boundary_counting_statistic(cluster, refine=4):
    """sum_m ( int_{Omega \\ union of cubes} |z_m - z|^-3 dz )^2.

    The complement of the cube union inside the box domain is integrated by
    midpoint quadrature on a (d/refine)-spaced grid restricted to points not
    covered by any particle cube.
    """
    if cluster.count == 0:
        raise ValueError("empty cluster")
    domain = cluster.domain
    if domain.kind != "box":
        raise ValueError("boundary statistic is defined for box domains")
    d = cluster.d
    step = d / refine
    corner = domain.center - domain.extents / 2.0
    counts = np.ceil(domain.extents / step - 1e-12).astype(int)
    axes = [corner[i] + step * (np.arange(counts[i]) + 0.5) for i in range(3)]
    grid = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grid], axis=1)
    pts = pts[domain.contains(pts)]
    # a point is covered iff it falls inside some cube of the lattice
    lat_counts = np.floor(domain.extents / d + 1e-12).astype(int)
    rel = (pts - corner) / d
    inside_lattice = np.all((rel >= 0) & (rel < lat_counts), axis=1)
    comp = pts[~inside_lattice]
    if comp.shape[0] == 0:
        return 0.0
    w = step ** 3
    total = 0.0
    for m in range(cluster.count):
        diff = comp - cluster.centers[m]
        r3 = np.einsum("ij,ij->i", diff, diff) ** 1.5
        total += (w * np.sum(1.0 / r3)) ** 2
    return float(total)
