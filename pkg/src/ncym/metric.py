"""Riemannian structures on the derivation algebra: block assembly and
connection extraction.

A structure is the triple (base metric g^M, fiber metric g_ab, ordinary
connection A).  In the frame (partial_mu, ad(E_a)) the metric has blocks

    g_mu_nu = g^M_mu_nu + A^a_mu A^b_nu g_ab      g_mu_b = -A^a_mu g_ab
    g_a_nu  = -g_ab A^b_nu                        g_a_b  = g_ab

while in the covariant frame (nabla_mu, ad(E_a)) it is block diagonal
(g^M, g_ab).  The inverse carries blocks (h^mu_nu = (g^M)^-1,
h^mu_b = h^mu_nu A^b_nu, h^a_b = h_Int^ab + h^mu_nu A^a_mu A^b_nu) with
h_Int = (g_ab)^-1.  The connection is recoverable from the assembled blocks
alone — A^a_mu = -h_Int^ab g_b_mu — and is the unique one making the two
frames orthogonal, which is what ``extract_connection`` implements.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .connections import OrdinaryConnection
from .errors import ShapeError, SingularMetric
from .geometry import BaseMetric, Manifold, grid_points
from .lie_core import LieBasis, Representation

__all__ = [
    "RiemannianStructure",
    "assemble",
    "extract_connection",
    "decompose_metric",
    "invert",
    "identity_residuals",
    "orthogonality_residual",
]

_COND_WARN = 1e8


def _expand_internal(man: Manifold, internal, m: int) -> dict:
    """Normalize the fiber-metric input to per-chart pointwise arrays."""
    out = {}
    for ch in man.charts:
        if isinstance(internal, dict):
            block = np.asarray(internal[ch.name], dtype=float)
        elif callable(internal):
            block = np.asarray(internal(ch.name, grid_points(ch)), dtype=float)
        else:
            block = np.asarray(internal, dtype=float)
        if block.shape == (m, m):
            block = np.broadcast_to(block, ch.shape + (m, m)).copy()
        if block.shape != ch.shape + (m, m):
            raise ShapeError(
                f"fiber metric on {ch.name}: shape {block.shape}, want {(m, m)} "
                f"or {ch.shape + (m, m)}"
            )
        out[ch.name] = block
    return out


def _check_spd(name: str, block: np.ndarray, what: str):
    if np.max(np.abs(block - np.swapaxes(block, -1, -2))) > 1e-12:
        raise SingularMetric(f"{what} on {name} must be symmetric")
    ev = np.linalg.eigvalsh(block)
    if np.min(ev) <= 0:
        idx = np.unravel_index(int(np.argmin(ev[..., 0])), ev[..., 0].shape)
        raise SingularMetric(f"{what} on {name} not positive definite at {idx}")
    cond = float(np.max(ev) / np.min(ev))
    if cond > _COND_WARN:
        warnings.warn(f"{what} on {name}: condition number {cond:.3e}")


@dataclass
class RiemannianStructure:
    """Assembled metric data: blocks, inverses, densities, per chart."""

    man: Manifold
    base: BaseMetric
    internal: dict
    conn: OrdinaryConnection
    hbase: dict = field(default_factory=dict, repr=False)
    hint: dict = field(default_factory=dict, repr=False)
    sqrt_det_int: dict = field(default_factory=dict, repr=False)
    sqrtg: dict = field(default_factory=dict, repr=False)

    @property
    def d(self) -> int:
        return self.man.dim

    @property
    def m(self) -> int:
        return self.conn.basis.dim

    def full_metric(self, name: str) -> np.ndarray:
        """Blocks in the coordinate frame, shape + (d+m, d+m)."""
        d, m = self.d, self.m
        gM = self.base.g[name]
        gI = self.internal[name]
        A = self.conn.A[name]
        G = np.zeros(gM.shape[:-2] + (d + m, d + m))
        Ag = np.einsum("...ma,...ab->...mb", A, gI)
        G[..., :d, :d] = gM + np.einsum("...ma,...na->...mn", Ag, A)
        G[..., :d, d:] = -Ag
        G[..., d:, :d] = -np.swapaxes(Ag, -1, -2)
        G[..., d:, d:] = gI
        return G

    def full_inverse(self, name: str) -> np.ndarray:
        """Inverse blocks from the closed formulas, shape + (d+m, d+m)."""
        d, m = self.d, self.m
        h = self.hbase[name]
        hI = self.hint[name]
        A = self.conn.A[name]
        H = np.zeros(h.shape[:-2] + (d + m, d + m))
        hA = np.einsum("...mn,...na->...ma", h, A)
        H[..., :d, :d] = h
        H[..., :d, d:] = hA
        H[..., d:, :d] = np.swapaxes(hA, -1, -2)
        H[..., d:, d:] = hI + np.einsum("...ma,...mb->...ab", A, hA)
        return H


def assemble(base: BaseMetric, internal, conn: OrdinaryConnection) -> RiemannianStructure:
    """Build the Riemannian structure from (g^M, g_ab, A)."""
    man = conn.man
    if base.man is not man:
        raise ShapeError("base metric and connection live on different manifolds")
    m = conn.basis.dim
    blocks = _expand_internal(man, internal, m)
    riem = RiemannianStructure(man, base, blocks, conn)
    for ch in man.charts:
        gI = blocks[ch.name]
        _check_spd(ch.name, gI, "fiber metric")
        riem.hint[ch.name] = np.linalg.inv(gI)
        riem.sqrt_det_int[ch.name] = np.sqrt(np.linalg.det(gI))
        riem.hbase[ch.name] = base.inv[ch.name]
        riem.sqrtg[ch.name] = base.sqrt_det[ch.name] * riem.sqrt_det_int[ch.name]
    return riem


def extract_connection(
    man: Manifold,
    basis: LieBasis,
    rep: Representation,
    g_full: dict,
) -> OrdinaryConnection:
    """Recover the unique connection orthogonalizing the two frames.

    ``g_full[name]`` are coordinate-frame blocks, shape + (d+m, d+m); the
    potential is A^a_mu = -h_Int^ab g_b_mu from the fiber block's inverse.
    """
    d, m = man.dim, basis.dim
    A = {}
    for ch in man.charts:
        G = np.asarray(g_full[ch.name], dtype=float)
        if G.shape != ch.shape + (d + m, d + m):
            raise ShapeError(f"full metric on {ch.name}: bad shape {G.shape}")
        fiber = G[..., d:, d:]
        det = np.linalg.det(fiber)
        if np.min(np.abs(det)) < 1e-14:
            idx = np.unravel_index(int(np.argmin(np.abs(det))), det.shape)
            raise SingularMetric(
                f"fiber block singular at grid index {idx} on chart {ch.name}"
            )
        hint = np.linalg.inv(fiber)
        A[ch.name] = -np.einsum("...ab,...bm->...ma", hint, G[..., d:, :d])
    return OrdinaryConnection(man, basis, rep, A)


def decompose_metric(
    man: Manifold,
    basis: LieBasis,
    rep: Representation,
    g_full: dict,
) -> tuple[BaseMetric, dict, OrdinaryConnection]:
    """Split full coordinate-frame blocks into (g^M, g_ab, A)."""
    d = man.dim
    conn = extract_connection(man, basis, rep, g_full)
    internal = {}
    gM = {}
    for ch in man.charts:
        G = np.asarray(g_full[ch.name], dtype=float)
        gI = G[..., d:, d:]
        internal[ch.name] = gI
        A = conn.A[ch.name]
        Ag = np.einsum("...ma,...ab->...mb", A, gI)
        gM[ch.name] = G[..., :d, :d] - np.einsum("...ma,...na->...mn", Ag, A)
    return BaseMetric(man, gM), internal, conn


def invert(riem: RiemannianStructure) -> dict:
    """The inverse blocks per chart: h^mu_nu, h_Int^ab and the full matrix."""
    return {
        "hbase": riem.hbase,
        "hint": riem.hint,
        "full": {ch.name: riem.full_inverse(ch.name) for ch in riem.man.charts},
    }


def identity_residuals(riem: RiemannianStructure) -> dict:
    """Residuals of the closed-form inverse identities against brute force.

    The oracle is the dense (d+m) x (d+m) pointwise inverse of the assembled
    blocks; returned residuals are sup norms of:
      base_inverse:  h^mu_nu vs the oracle's horizontal block
      potential:     A^a_mu vs g^M_mu_nu h^a_nu (oracle blocks)
      fiber_inverse: h_Int^ab vs h^ab - h^mu_nu A^a_mu A^b_nu (oracle blocks)
      product:       (g)(h) - Id with both from the closed formulas
    """
    d = riem.d
    out = {"base_inverse": 0.0, "potential": 0.0, "fiber_inverse": 0.0, "product": 0.0}
    for ch in riem.man.charts:
        name = ch.name
        G = riem.full_metric(name)
        H = riem.full_inverse(name)
        Hbrute = np.linalg.inv(G)
        A = riem.conn.A[name]
        gM = riem.base.g[name]

        out["base_inverse"] = max(
            out["base_inverse"],
            float(np.max(np.abs(Hbrute[..., :d, :d] - riem.hbase[name]))),
        )
        A_from_h = np.einsum("...mn,...an->...ma", gM, Hbrute[..., d:, :d])
        out["potential"] = max(out["potential"], float(np.max(np.abs(A_from_h - A))))
        hint_from_h = Hbrute[..., d:, d:] - np.einsum(
            "...ma,...mn,...nb->...ab", A, riem.hbase[name], A
        )
        out["fiber_inverse"] = max(
            out["fiber_inverse"],
            float(np.max(np.abs(hint_from_h - riem.hint[name]))),
        )
        prod = np.einsum("...ij,...jk->...ik", G, H)
        out["product"] = max(
            out["product"],
            float(np.max(np.abs(prod - np.eye(d + riem.m)))),
        )
    return out


def orthogonality_residual(
    riem_or_conn, g_full: dict | None = None
) -> float:
    """Max over charts and points of |g(nabla_mu, ad(E_b))|.

    With no second argument, evaluates the assembled structure (zero up to
    rounding); given full blocks and a connection, measures how well that
    connection orthogonalizes them.
    """
    if g_full is None:
        riem = riem_or_conn
        conn, man = riem.conn, riem.man
        blocks = {ch.name: riem.full_metric(ch.name) for ch in man.charts}
    else:
        conn = riem_or_conn
        man = conn.man
        blocks = g_full
    d = man.dim
    worst = 0.0
    for ch in man.charts:
        G = np.asarray(blocks[ch.name], dtype=float)
        gI = G[..., d:, d:]
        mixed = np.swapaxes(G[..., :d, d:], -1, -2)  # g_b_mu
        A = conn.A[ch.name]
        resid = mixed + np.einsum("...ba,...ma->...bm", gI, A)
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst
