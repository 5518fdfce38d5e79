"""Model terms, sufficient statistics, and change statistics.

A model is a ``ModelSpec``: an ordered tuple of within-block terms, an
ordered tuple of between-block terms (dyad-independent only), and a
block-covariate rule.  Statistic vectors always follow the declared term
order.

Within-block terms over a signed network y with indicators a[i,j,+]/a[i,j,-]:

  EdgesPos / EdgesNeg     edge counts per sign.
  TriadPPP                sum over i<j of a[i,j,+] * 1(some h has
                          a[i,h,+] a[h,j,+] > 0): positive edges closed by
                          at least one mutual friend.
  TriadPMM                same with a[i,h,-] a[h,j,-]: positive edges with
                          at least one mutual enemy.
  GWDPos/GWDNeg(omega)    exp(omega) * sum_d (1-(1-e^-omega)^d) * deg_d,
                          deg_d = #nodes of signed degree d.
  GWESEPos/Neg(omega)     geometrically weighted counts of same-sign edges
                          by their number of shared enemies (mutual
                          negative partners).
  GWESFPos/Neg(omega)     same with shared friends (mutual positive
                          partners).

At omega = 0 the GWESE/GWESF terms reduce to indicator counts, e.g.
GWESF+(0) == TriadPPP and GWESE+(0) == TriadPMM.

Between-block models are dyad-independent with statistics (EdgesPos,
EdgesNeg), optionally interacted with pair covariates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

WITHIN_TERM_NAMES = (
    "EdgesPos", "EdgesNeg", "TriadPPP", "TriadPMM",
    "GWDPos", "GWDNeg", "GWESEPos", "GWESENeg", "GWESFPos", "GWESFNeg",
)
BETWEEN_TERM_NAMES = ("EdgesPos", "EdgesNeg")
GW_TERM_NAMES = ("GWDPos", "GWDNeg", "GWESEPos", "GWESENeg",
                 "GWESFPos", "GWESFNeg")

_TERM_CODES = {
    "EdgesPos": 0, "EdgesNeg": 1, "GWDPos": 2, "GWDNeg": 3,
    "GWESEPos": 4, "GWESENeg": 5, "GWESFPos": 6, "GWESFNeg": 7,
    "TriadPPP": 8, "TriadPMM": 9,
}

COVARIATE_TYPES = ("intercept", "log_size", "one_hot")


@dataclass(frozen=True)
class Term:
    """One model term; omega is the decay and only meaningful for GW terms."""

    name: str
    omega: float = 0.0

    def __post_init__(self):
        if self.name not in WITHIN_TERM_NAMES:
            raise ValueError(f"unknown term {self.name!r}")
        if self.name in GW_TERM_NAMES:
            if self.omega < 0:
                raise ValueError("decay omega must be >= 0")
        elif self.omega != 0.0:
            raise ValueError(f"{self.name} does not take a decay parameter")

    def label(self):
        if self.name in GW_TERM_NAMES:
            return f"{self.name}({self.omega:g})"
        return self.name


@dataclass(frozen=True)
class ModelSpec:
    """Term lists plus the covariate rule mapping blocks to v_k vectors.

    covariates: "intercept" gives v_k = (1,); "log_size" gives
    v_k = (1, log n_k); "one_hot" gives v_k = e_k.  Between-block pair
    covariates are the constant u_kl = (1,).
    """

    within: tuple
    between: tuple = (Term("EdgesPos"), Term("EdgesNeg"))
    covariates: str = "intercept"

    def __post_init__(self):
        object.__setattr__(self, "within", tuple(self.within))
        object.__setattr__(self, "between", tuple(self.between))
        if len(self.within) < 1:
            raise ValueError("at least one within-block term is required")
        for t in self.between:
            if t.name not in BETWEEN_TERM_NAMES:
                raise ValueError(
                    f"between-block terms must be dyad-independent, got {t.name}")
        if len(self.between) < 1:
            raise ValueError("at least one between-block term is required")
        if self.covariates not in COVARIATE_TYPES:
            raise ValueError(f"unknown covariate rule {self.covariates!r}")

    @property
    def p(self):
        """Number of within-block statistics."""
        return len(self.within)

    @property
    def q(self):
        """Number of between-block statistics."""
        return len(self.between)

    def within_labels(self):
        return [t.label() for t in self.within]

    def between_labels(self):
        return [t.label() for t in self.between]

    def term_codes(self):
        """(codes, omegas) arrays for the numba kernels."""
        codes = np.array([_TERM_CODES[t.name] for t in self.within],
                         dtype=np.int64)
        omegas = np.array([t.omega for t in self.within])
        return codes, omegas

    def within_covariates(self, block_sizes):
        """(K, s) matrix of block covariates v_k."""
        sizes = np.asarray(block_sizes, dtype=np.float64)
        k = sizes.size
        if self.covariates == "intercept":
            return np.ones((k, 1))
        if self.covariates == "log_size":
            with np.errstate(divide="ignore"):
                logs = np.where(sizes > 0, np.log(np.maximum(sizes, 1)), 0.0)
            return np.column_stack([np.ones(k), logs])
        return np.eye(k)

    def between_covariates(self, k_blocks):
        """(K, K, t) array of pair covariates u_kl (constant-only)."""
        return np.ones((k_blocks, k_blocks, 1))

    # -- serialization ----------------------------------------------------

    def to_dict(self):
        return {
            "within": [{"term": t.name, "omega": t.omega} if t.name in GW_TERM_NAMES
                       else {"term": t.name} for t in self.within],
            "between": [{"term": t.name} for t in self.between],
            "covariates": {"type": self.covariates},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        within = tuple(Term(e["term"], float(e.get("omega", 0.0)))
                       for e in d["within"])
        between = tuple(Term(e["term"], float(e.get("omega", 0.0)))
                        for e in d.get("between",
                                       [{"term": "EdgesPos"},
                                        {"term": "EdgesNeg"}]))
        cov = d.get("covariates", {"type": "intercept"})["type"]
        return cls(within, between, cov)

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


# -- named presets -----------------------------------------------------------


def independent_spec(covariates="intercept"):
    """Edge counts only; fully dyad-independent."""
    return ModelSpec((Term("EdgesPos"), Term("EdgesNeg")), covariates=covariates)


def degree_spec(omega=0.2, covariates="intercept"):
    """Edges plus geometrically weighted degrees of both signs."""
    return ModelSpec((Term("EdgesPos"), Term("EdgesNeg"),
                      Term("GWDPos", omega), Term("GWDNeg", omega)),
                     covariates=covariates)


def partial_triad_spec(gwd_omega=0.2, esp_omega=0.0, covariates="intercept"):
    """Degree spec plus shared-enemy closure of positive edges."""
    return ModelSpec((Term("EdgesPos"), Term("EdgesNeg"),
                      Term("GWDPos", gwd_omega), Term("GWDNeg", gwd_omega),
                      Term("GWESEPos", esp_omega)),
                     covariates=covariates)


def full_triad_spec(gwd_omega=0.2, esp_omega=0.0, covariates="intercept"):
    """All four shared-partner families plus edges and degrees."""
    return ModelSpec((Term("EdgesPos"), Term("EdgesNeg"),
                      Term("GWDPos", gwd_omega), Term("GWDNeg", gwd_omega),
                      Term("GWESEPos", esp_omega), Term("GWESFPos", esp_omega),
                      Term("GWESENeg", esp_omega), Term("GWESFNeg", esp_omega)),
                     covariates=covariates)


# -- global statistics -------------------------------------------------------


def edges_stat(net, sign):
    return float(net.edge_count(sign))


def degree_histogram(net, sign):
    """Counts of nodes by signed degree; index d holds #nodes of degree d.

    Totals always equal the node count (degree-zero nodes included).
    """
    deg = net.degrees(sign)
    return np.bincount(deg, minlength=1)


def shared_partner_histogram(net, edge_sign, partner_sign):
    """Counts of edge_sign edges by their number of shared partner_sign
    neighbors.  Totals equal the edge count of that sign."""
    src, dst, sgn = net.edge_arrays()
    mask = sgn == edge_sign
    if not mask.any():
        return np.zeros(1, dtype=np.int64)
    ap = net.csr(partner_sign)
    s = (ap @ ap).tocsr()
    counts = np.asarray(s[src[mask], dst[mask]]).ravel().astype(np.int64)
    return np.bincount(counts, minlength=1)


def gwd_stat(net, sign, omega):
    """Geometrically weighted degree statistic for one sign."""
    hist = degree_histogram(net, sign)
    d = np.arange(hist.size)
    weights = 1.0 - (1.0 - math.exp(-omega)) ** d
    weights[0] = 0.0
    return float(math.exp(omega) * np.dot(weights, hist))


def gwesp_stat(net, edge_sign, partner_sign, omega):
    """Geometrically weighted shared-partner statistic.

    partner_sign -1 counts shared enemies, +1 shared friends; at omega 0
    this is the indicator count of edges with at least one such partner.
    """
    hist = shared_partner_histogram(net, edge_sign, partner_sign)
    d = np.arange(hist.size, dtype=np.float64)
    weights = 1.0 - (1.0 - math.exp(-omega)) ** d
    weights[0] = 0.0
    return float(math.exp(omega) * np.dot(weights, hist))


def triad_stat(net, variant):
    """Indicator triad counts: 'ppp' positive edges with a mutual friend,
    'pmm' positive edges with a mutual enemy (case-insensitive)."""
    variant = str(variant).upper()
    if variant == "PPP":
        return gwesp_stat(net, 1, 1, 0.0)
    if variant == "PMM":
        return gwesp_stat(net, 1, -1, 0.0)
    raise ValueError(f"unknown triad variant {variant!r}")


_TERM_EVAL = {
    "EdgesPos": lambda net, om: edges_stat(net, 1),
    "EdgesNeg": lambda net, om: edges_stat(net, -1),
    "TriadPPP": lambda net, om: triad_stat(net, "PPP"),
    "TriadPMM": lambda net, om: triad_stat(net, "PMM"),
    "GWDPos": lambda net, om: gwd_stat(net, 1, om),
    "GWDNeg": lambda net, om: gwd_stat(net, -1, om),
    "GWESEPos": lambda net, om: gwesp_stat(net, 1, -1, om),
    "GWESENeg": lambda net, om: gwesp_stat(net, -1, -1, om),
    "GWESFPos": lambda net, om: gwesp_stat(net, 1, 1, om),
    "GWESFNeg": lambda net, om: gwesp_stat(net, -1, 1, om),
}


def within_stats(net, spec):
    """Vector of within-block statistics in declared term order."""
    return np.array([_TERM_EVAL[t.name](net, t.omega) for t in spec.within])


def between_stats(net, spec, u=None):
    """Between-block statistics, reparametrized by the pair covariate u.

    With the constant covariate this is just (EdgesPos, EdgesNeg) in
    declared order.
    """
    h = np.array([edges_stat(net, 1 if t.name == "EdgesPos" else -1)
                  for t in spec.between])
    if u is None:
        return h
    return np.kron(np.asarray(u, dtype=np.float64), h)


def reparam_within(stats, v):
    """Kronecker lift of a p-vector of block statistics by covariate v.

    The lifted vector pairs with the row-major flattening of the (s, p)
    coefficient matrix: beta_vec . (v kron s) == (v' B) . s.
    """
    return np.kron(np.asarray(v, dtype=np.float64),
                   np.asarray(stats, dtype=np.float64))


@dataclass(frozen=True)
class ChangeStatistics:
    """Reparametrized change statistics for toggling one dyad from zero."""

    delta_plus: np.ndarray
    delta_minus: np.ndarray


def change_stats(net, i, j, spec, v=None, z=None):
    """Change statistics for dyad (i, j), conditioning on all other dyads.

    delta_plus is s(y with y_ij = +) - s(y with y_ij = 0) and likewise for
    delta_minus; both are lifted by the block covariate v when given.  If a
    block assignment z is supplied, i and j must share a block.
    """
    if i == j:
        raise ValueError("dyads require distinct endpoints")
    if z is not None:
        labels = getattr(z, "z", z)
        if labels[i] != labels[j]:
            raise ValueError(f"nodes {i} and {j} lie in different blocks")
    mat = net.signed_matrix()
    mat[i, j] = 0
    mat[j, i] = 0
    codes, omegas = spec.term_codes()
    dplus = np.zeros(spec.p)
    dminus = np.zeros(spec.p)
    _kernels.dyad_change(mat, i, j, codes, omegas, dplus, dminus)
    if v is not None:
        dplus = reparam_within(dplus, v)
        dminus = reparam_within(dminus, v)
    return ChangeStatistics(dplus, dminus)


def block_change_matrix(mat, spec):
    """All-dyad change statistics of one block's dense matrix.

    Returns (dplus, dminus, values) over dyads in i < j lexicographic
    order; used by the pseudo-likelihood assembly and score computation.
    """
    codes, omegas = spec.term_codes()
    work = np.ascontiguousarray(mat, dtype=np.int8)
    return _kernels.all_dyad_changes(work, codes, omegas)
