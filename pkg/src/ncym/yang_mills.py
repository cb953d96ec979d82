"""Yang-Mills functional for module connections: the three-term action,
its analytic gradient, a deterministic vacuum solver, and classification
of solutions by representation-theoretic fingerprints.

The action is the squared curvature norm.  In the adapted basis it splits
into a horizontal (field-strength), mixed (covariant scalar derivative)
and vertical (scalar potential) term, each a positive integral.  Gradients
are exact discrete adjoints of the curvature map, so finite-difference
directional derivatives of the action reproduce them to solver precision.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .connections import NCConnection, nc_curvature, nc_curvature_via_forms
from .errors import ClassificationRefused, ShapeError
from .geometry import adjoint_partial_derivative
from .lie_core import LieBasis
from .nc_forms import scalar_product


@dataclass(frozen=True)
class ActionBreakdown:
    """The three positive terms of the action and their local densities.

    ``densities[name]`` stacks the horizontal, mixed and vertical integrand
    (already weighted by the partition of unity and the metric density) on
    the leading axis; summing times the cell volume reproduces the terms.
    """

    s_horizontal: float
    s_mixed: float
    s_vertical: float
    densities: dict

    @property
    def s_total(self) -> float:
        return self.s_horizontal + self.s_mixed + self.s_vertical


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 400
    tol: float = 1e-8
    step: float = 0.25
    momentum: float = 0.85
    armijo: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 30
    project: bool = True


@dataclass(frozen=True)
class VacuumReport:
    """Terminal diagnostics of a solver run.

    ``residuals`` are the integrated norms of the three vacuum equations in
    the order (vertical, mixed, horizontal): the scalar fields closing on
    the structure constants, the covariantly-constant scalars, and the
    field-strength matching condition.
    """

    residuals: tuple
    action: float
    converged: bool
    iterations: int
    casimir_spectrum: tuple | None = None
    casimir_deviation: float | None = None
    commutant_dim: int | None = None
    refused: str | None = None


def _check_shared_reference(ncc: NCConnection, riem) -> None:
    if riem.conn is not ncc.ref:
        raise ShapeError(
            "metric and connection must share the same reference connection "
            "object; re-expanding against a different background is refused"
        )


def _weight(man, riem, name):
    ch = man.chart(name)
    return man.weights[name] * riem.sqrtg[name] * ch.cell_volume


def _raised_tensors(ncc, riem, name):
    """Curvature with all indices raised, times the integration weight."""
    O = nc_curvature(ncc)[name]
    man = ncc.ref.man
    W = _weight(man, riem, name)[..., None, None, None, None]
    hb = riem.hbase[name]
    hi = riem.hint[name]
    Thh = W * np.einsum("...mr,...ns,...rsij->...mnij", hb, hb, O["hh"])
    Thv = W * np.einsum("...mn,...bc,...ncij->...mbij", hb, hi, O["hv"])
    Tvv = W * np.einsum("...ac,...bd,...cdij->...abij", hi, hi, O["vv"])
    return O, Thh, Thv, Tvv


def action(ncc: NCConnection, riem) -> ActionBreakdown:
    """Evaluate the curvature-norm action, term by term.

    Each term contracts one curvature block with the matching inverse-metric
    blocks and the hermitian trace, integrated with the metric density.  All
    three are non-negative; their sum is the squared curvature norm.
    """
    _check_shared_reference(ncc, riem)
    man = ncc.ref.man
    curv = nc_curvature(ncc)
    s_h = s_m = s_v = 0.0
    densities = {}
    for ch in man.charts:
        name = ch.name
        O = curv[name]
        hb = riem.hbase[name]
        hi = riem.hint[name]
        w = man.weights[name] * riem.sqrtg[name]
        dh = 0.5 * np.einsum(
            "...mr,...ns,...mnij,...rsij->...", hb, hb, np.conj(O["hh"]), O["hh"]
        )
        dm = np.einsum(
            "...mn,...bc,...mbij,...ncij->...", hb, hi, np.conj(O["hv"]), O["hv"]
        )
        dv = 0.5 * np.einsum(
            "...ac,...bd,...abij,...cdij->...", hi, hi, np.conj(O["vv"]), O["vv"]
        )
        dens = w * np.stack([dh.real, dm.real, dv.real])
        densities[name] = dens
        s_h += float(np.sum(dens[0]) * ch.cell_volume)
        s_m += float(np.sum(dens[1]) * ch.cell_volume)
        s_v += float(np.sum(dens[2]) * ch.cell_volume)
    return ActionBreakdown(s_h, s_m, s_v, densities)


def action_via_cycle(ncc: NCConnection, riem) -> float:
    """The same functional through the differential-forms pipeline.

    The curvature is produced from the connection one-form by differential
    and wedge, and its norm taken with the graded scalar product -- sharing
    no contraction code with :func:`action`.
    """
    _check_shared_reference(ncc, riem)
    man = ncc.ref.man
    forms = {ch.name: nc_curvature_via_forms(ncc, ch.name) for ch in man.charts}
    return float(scalar_product(forms, forms, man, riem).real)


# --------------------------------------------------------------- gradient


def gradient(ncc: NCConnection, riem) -> dict:
    """Exact gradient of the discrete action in the flat real pairing.

    Returns ``{"a": {...}, "phi": {...}}`` with the same per-chart shapes as
    the connection fields.  The pairing is ``sum Re tr(G^dagger d)`` over
    grid points and indices, so a finite-difference directional derivative
    of :func:`action` along ``d`` matches ``pairing(gradient, d)``.
    """
    _check_shared_reference(ncc, riem)
    man = ncc.ref.man
    rep = ncc.ref.rep
    C = ncc.ref.basis.structure
    out_a, out_p = {}, {}
    for ch in man.charts:
        name = ch.name
        O, Thh, Thv, Tvv = _raised_tensors(ncc, riem, name)
        a = ncc.a[name]
        phi = ncc.phi[name]
        A = ncc.ref.A[name]
        F = ncc.ref.curvature()[name]
        RA = ncc.ref.rep_potential(name)
        d = man.dim
        m = ncc.ref.basis.dim

        ga = np.zeros_like(a)
        gp = np.zeros_like(phi)

        def brk(x, y):
            return x @ y - y @ x

        for nu in range(d):
            acc = np.zeros_like(a[..., 0, :, :])
            for mu in range(d):
                T = Thh[..., mu, nu, :, :]
                acc = acc + 2.0 * (
                    adjoint_partial_derivative(T, ch, mu)
                    - brk(RA[..., mu, :, :], T)
                    - brk(a[..., mu, :, :], T)
                )
            for b in range(m):
                acc = acc + 2.0 * brk(phi[..., b, :, :], Thv[..., nu, b, :, :])
            ga[..., nu, :, :] = acc

        mixed = np.einsum("...ma,abc,...mbij->...cij", A, C, Thv)
        struct = np.einsum("abc,...abij->...cij", C, Tvv)
        for c in range(m):
            acc = -np.einsum("...mn,...mnij->...ij", F[..., c], Thh)
            for mu in range(d):
                T = Thv[..., mu, c, :, :]
                acc = acc + 2.0 * (
                    adjoint_partial_derivative(T, ch, mu)
                    - brk(RA[..., mu, :, :], T)
                    - brk(a[..., mu, :, :], T)
                )
            acc = acc - 2.0 * mixed[..., c, :, :]
            for aa in range(m):
                acc = acc - 2.0 * brk(phi[..., aa, :, :], Tvv[..., aa, c, :, :])
            acc = acc - struct[..., c, :, :]
            gp[..., c, :, :] = acc
        out_a[name] = ga
        out_p[name] = gp
    return {"a": out_a, "phi": out_p}


def pairing(grad: dict, direction: dict) -> float:
    """The flat real inner product under which :func:`gradient` is exact."""
    total = 0.0
    for part in ("a", "phi"):
        for name, g in grad[part].items():
            d = direction[part][name]
            total += float(np.sum(np.conj(g) * d).real)
    return total


def grad_norm(grad: dict) -> float:
    return float(
        np.sqrt(
            sum(
                np.sum(np.abs(g) ** 2)
                for part in ("a", "phi")
                for g in grad[part].values()
            )
        )
    )


# ----------------------------------------------------------------- vacua


def vacuum_residuals(ncc: NCConnection, riem) -> tuple:
    """Integrated norms of the three vacuum equations.

    Order: (vertical, mixed, horizontal) -- the scalar fields closing on the
    structure constants, covariant constancy of the scalars, and the
    field-strength matching equation.  Each is the square root of the
    corresponding action term, hence zero exactly on solutions.
    """
    br = action(ncc, riem)
    return (
        float(np.sqrt(max(br.s_vertical, 0.0))),
        float(np.sqrt(max(br.s_mixed, 0.0))),
        float(np.sqrt(max(br.s_horizontal, 0.0))),
    )


def _dict_map(fn, *dicts):
    return {k: fn(*(d[k] for d in dicts)) for k in dicts[0]}


def _step(ncc: NCConnection, direction: dict, eta: float, project: bool) -> NCConnection:
    def upd(x, p):
        y = x + eta * p
        if project:
            y = 0.5 * (y - np.conj(np.swapaxes(y, -1, -2)))
        return y

    return replace(
        ncc,
        a=_dict_map(upd, ncc.a, direction["a"]),
        phi=_dict_map(upd, ncc.phi, direction["phi"]),
    )


def solve_vacuum(init: NCConnection, riem, opts: SolverOptions | None = None):
    """Minimize the action over (a, phi) by damped gradient descent.

    Heavy-ball momentum with Armijo backtracking; the step grows again after
    easy accepts and shrinks on rejection, and a rejected momentum step falls
    back to plain steepest descent before declaring a stall.  Deterministic:
    no randomness enters the loop.

    Returns ``(terminal connection, VacuumReport, trace)`` where ``trace`` is
    the per-iteration list of ``(action, gradient norm)``.  Non-convergence
    within the budget is reported through the flag, never as an exception.
    """
    opts = opts or SolverOptions()
    state = replace(init, a={k: v.copy() for k, v in init.a.items()},
                    phi={k: v.copy() for k, v in init.phi.items()})
    vel = None
    S = action(state, riem).s_total
    eta = opts.step
    trace = []
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        g = gradient(state, riem)
        gn = grad_norm(g)
        trace.append((S, gn))
        if gn <= opts.tol:
            converged = True
            break
        if vel is None:
            vel = {p: {k: v.copy() for k, v in g[p].items()} for p in ("a", "phi")}
        else:
            vel = {
                p: _dict_map(lambda v, gg: opts.momentum * v + gg, vel[p], g[p])
                for p in ("a", "phi")
            }
        direction = {p: _dict_map(np.negative, vel[p]) for p in ("a", "phi")}
        slope = pairing(g, direction)
        if slope >= 0.0:
            direction = {p: _dict_map(np.negative, g[p]) for p in ("a", "phi")}
            vel = {p: {k: v.copy() for k, v in g[p].items()} for p in ("a", "phi")}
            slope = -gn * gn
        eta = min(2.0 * eta, 64.0 * opts.step)
        accepted = False
        for _ in range(opts.max_backtracks):
            cand = _step(state, direction, eta, opts.project)
            S_new = action(cand, riem).s_total
            if S_new <= S + opts.armijo * eta * slope:
                state, S, accepted = cand, S_new, True
                break
            eta *= opts.shrink
        if not accepted:
            if slope != -gn * gn:
                # momentum direction failed entirely: drop it and retry once
                direction = {p: _dict_map(np.negative, g[p]) for p in ("a", "phi")}
                vel = {p: {k: v.copy() for k, v in g[p].items()} for p in ("a", "phi")}
                slope = -gn * gn
                eta = opts.step
                for _ in range(opts.max_backtracks):
                    cand = _step(state, direction, eta, opts.project)
                    S_new = action(cand, riem).s_total
                    if S_new <= S + opts.armijo * eta * slope:
                        state, S, accepted = cand, S_new, True
                        break
                    eta *= opts.shrink
            if not accepted:
                break  # stalled at line-search resolution
    report = _report(state, riem, converged, it)
    return state, report, trace


def _report(ncc: NCConnection, riem, converged: bool, iterations: int) -> VacuumReport:
    res = vacuum_residuals(ncc, riem)
    S = action(ncc, riem).s_total
    try:
        cls = classify_vacuum(ncc.phi, ncc.ref.basis, hint=riem.hint)
        return VacuumReport(
            residuals=res,
            action=S,
            converged=converged,
            iterations=iterations,
            casimir_spectrum=cls["casimir_spectrum"],
            casimir_deviation=cls["casimir_deviation"],
            commutant_dim=cls["commutant_dim"],
        )
    except ClassificationRefused as err:
        return VacuumReport(
            residuals=res,
            action=S,
            converged=converged,
            iterations=iterations,
            refused=str(err),
        )


# ----------------------------------------------------------- classification


def classify_vacuum(
    phi,
    basis: LieBasis,
    hint=None,
    residual_tol: float = 1e-6,
    spectrum_tol: float = 1e-4,
) -> dict:
    """Fingerprint scalar fields that close on the structure constants.

    The fields must satisfy the algebraic closure equation to ``residual_tol``
    pointwise; otherwise the classification is refused.  The fingerprint is
    gauge invariant: the sorted spectrum of the contracted quadratic element
    ``h^{ab} phi_a phi_b`` (mean over the grid, plus its maximal spatial
    deviation) and the dimension of the joint commutant of the fields.
    """
    if isinstance(phi, np.ndarray):
        phi = {"_": phi}
    C = basis.structure
    m = basis.dim

    worst = 0.0
    spectra = []
    nullities = set()
    for name, f in phi.items():
        comm = np.einsum("...aij,...bjl->...abil", f, f)
        closure = comm - np.swapaxes(comm, -4, -3) - np.einsum(
            "abc,...cij->...abij", C, f
        )
        worst = max(worst, float(np.max(np.abs(closure))))
        if worst > residual_tol:
            raise ClassificationRefused(
                f"closure residual {worst:.3e} exceeds {residual_tol:.1e} on "
                f"chart {name!r}; fields are not a representation"
            )
        if hint is None:
            h = np.eye(m)
        elif isinstance(hint, dict):
            h = hint[name]
        else:
            h = np.asarray(hint)
        quad = np.einsum("...ab,...aij,...bjl->...il", np.broadcast_to(
            h, f.shape[:-3] + (m, m)), f, f)
        eig = np.sort(np.linalg.eigvalsh(quad), axis=-1)
        spectra.append(eig.reshape(-1, eig.shape[-1]))

        k = f.shape[-1]
        flat = f.reshape(-1, m, k, k)
        L = np.concatenate([_commutator_matrix(flat[:, a]) for a in range(m)], axis=1)
        sv = np.linalg.svd(L, compute_uv=False)
        scale = np.maximum(sv[:, :1], 1.0)
        nullity = np.sum(sv < 1e-8 * scale, axis=1)
        nullities.update(np.unique(nullity).tolist())

    allspec = np.concatenate(spectra, axis=0)
    mean = allspec.mean(axis=0)
    deviation = float(np.max(np.abs(allspec - mean)))
    if deviation > spectrum_tol:
        raise ClassificationRefused(
            f"spectrum varies over the grid by {deviation:.3e} "
            f"(> {spectrum_tol:.1e}); no single class fits"
        )
    if len(nullities) != 1:
        raise ClassificationRefused(
            f"commutant dimension varies over the grid: {sorted(nullities)}"
        )
    return {
        "casimir_spectrum": tuple(float(x) for x in mean),
        "casimir_deviation": deviation,
        "commutant_dim": int(nullities.pop()),
        "residual": worst,
    }


def _commutator_matrix(f):
    """Matrix of X -> [f, X] on vec(X), batched over the leading axis."""
    k = f.shape[-1]
    eye = np.eye(k)
    left = np.einsum("xij,kl->xikjl", f, eye).reshape(f.shape[0], k * k, k * k)
    right = np.einsum("ij,xlk->xikjl", eye, f).reshape(f.shape[0], k * k, k * k)
    return left - right


# ------------------------------------------------------------- diagnostics


def criticality_probe(
    ncc: NCConnection, riem, directions: int = 50, eps: float = 1e-3, seed: int = 0
) -> float:
    """Smallest finite-difference second directional derivative of the action
    at the given configuration, over random anti-hermitian directions."""
    rng = np.random.default_rng(seed)
    S0 = action(ncc, riem).s_total
    worst = np.inf
    for _ in range(directions):
        direction = {"a": {}, "phi": {}}
        total = 0.0
        for part, fields in (("a", ncc.a), ("phi", ncc.phi)):
            for name, f in fields.items():
                z = rng.normal(size=f.shape) + 1j * rng.normal(size=f.shape)
                z = 0.5 * (z - np.conj(np.swapaxes(z, -1, -2)))
                direction[part][name] = z
                total += float(np.sum(np.abs(z) ** 2))
        scale = 1.0 / np.sqrt(total)
        for part in ("a", "phi"):
            for name in direction[part]:
                direction[part][name] = direction[part][name] * scale
        Sp = action(_step(ncc, direction, eps, False), riem).s_total
        Sm = action(_step(ncc, direction, -eps, False), riem).s_total
        worst = min(worst, (Sp - 2.0 * S0 + Sm) / (eps * eps))
    return float(worst)
