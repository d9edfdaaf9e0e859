"""Iteration bookkeeping for the large-scale lower-bound scheme.

One step takes a lower bound exp(-S^alpha) on the unit-ball sup at distance S
and propagates it to distance R = S + (S/2)^(1/(1-eps)) - 1.  While
alpha > 1/(1-eps) the exponent improves to beta = alpha - (alpha-1)/2 * eps;
once alpha falls into (1, 1/(1-eps)] the step instead lands on the terminal
bound exp(-C R^(1+eps) log R).  `run_schedule` iterates the step with
eps1 = eps/2, starting from the alpha_0 absorbed out of the classical
S^(4/3) log S estimate, and certifies the recursion against its closed form
together with the per-step ratio and admissibility inequalities.

S_n grows like S^(1/(1-eps1)) per step, which overflows float64 for small
eps1 well before the schedule terminates.  All arithmetic therefore runs in
mpmath at 40 significant digits and the trajectory keeps a log10 column next
to the (possibly infinite) float value of S_n.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from math import ceil, inf, log

import mpmath

DPS = 40


def _mpf(x) -> mpmath.mpf:
    return mpmath.mpf(float(x))


@dataclass(frozen=True)
class StepInput:
    """Hypotheses for a single propagation step."""

    S: float
    alpha: float
    eps: float
    eps0: float = 1.0
    c0: float = 1.0
    C0: float = 1.0
    m: float = 1.0

    def __post_init__(self):
        if self.alpha <= 1.0:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if self.alpha > 2.0:
            raise ValueError(f"alpha must lie in (1, 2], got {self.alpha}")
        cap = self.eps0 / (1.0 + self.eps0)
        if not 0.0 < self.eps < cap:
            raise ValueError(
                f"eps must lie in (0, eps0/(1+eps0)) = (0, {cap:.6g}), got {self.eps}"
            )
        if self.S <= 2.0:
            raise ValueError(f"S must exceed 2, got {self.S}")


@dataclass(frozen=True)
class StepResult:
    """Outcome of one step together with the rescaled parameter mapping."""

    R: float
    case: int
    beta: float | None
    final_exponent: float | None
    log_factor: bool
    params: dict
    log10_R: float


def step(inp: StepInput) -> StepResult:
    """Propagate the lower bound from distance S to R.

    Case 1 (alpha > 1/(1-eps)) returns the improved exponent beta; case 2
    returns the terminal exponent 1+eps with the log factor flagged.  The
    params dict records the rescaling: lam = T, b = 1 + lam^-eps, C1 = 5*C0,
    c1 = 4 (>= 2^alpha), p = alpha*(1-eps), q = max(p, 1) + eps.
    """
    with mpmath.workdps(DPS):
        S = _mpf(inp.S)
        eps = _mpf(inp.eps)
        alpha = _mpf(inp.alpha)
        T = (S / 2) ** (1 / (1 - eps))
        R = S + T - 1
        p = alpha * (1 - eps)
        q = max(p, mpmath.mpf(1)) + eps
        params = {
            "lam": float(T),
            "b": float(1 + T ** (-eps)),
            "C1": 5.0 * inp.C0,
            "c1": 4.0,
            "p": float(p),
            "q": float(q),
        }
        log10_R = float(mpmath.log10(R))
        crossover = 1 / (1 - eps)
        if alpha > crossover:
            beta = alpha - (alpha - 1) / 2 * eps
            return StepResult(
                R=float(R),
                case=1,
                beta=float(beta),
                final_exponent=None,
                log_factor=False,
                params=params,
                log10_R=log10_R,
            )
        return StepResult(
            R=float(R),
            case=2,
            beta=None,
            final_exponent=float(1 + eps),
            log_factor=True,
            params=params,
            log10_R=log10_R,
        )


@dataclass(frozen=True)
class AdmissibilityResult:
    """Evaluation of (S/2-1)^(1+eps0) / (S/2)^(1/(1-eps)) >= 3*m_hat/c0.

    `threshold` is the unique S at which the left side crosses the right
    (the left side is strictly increasing on S > 2 whenever
    1 + eps0 >= 1/(1-eps)); infinite when the inequality is unattainable.
    """

    ok: bool
    lhs: float
    rhs: float
    threshold: float
    attainable: bool

    def __bool__(self) -> bool:
        return self.ok


def _admissibility_lhs(S: mpmath.mpf, eps: mpmath.mpf, eps0: mpmath.mpf) -> mpmath.mpf:
    return (S / 2 - 1) ** (1 + eps0) / (S / 2) ** (1 / (1 - eps))


def admissibility(S, eps, eps0, m_hat, c0) -> AdmissibilityResult:
    """Check that S is large enough for the negative-part envelope to fit."""
    if S <= 2.0:
        raise ValueError(f"S must exceed 2, got {S}")
    with mpmath.workdps(DPS):
        S_ = _mpf(S)
        eps_ = _mpf(eps)
        eps0_ = _mpf(eps0)
        rhs = 3 * _mpf(m_hat) / _mpf(c0)
        lhs = _admissibility_lhs(S_, eps_, eps0_)
        gap = (1 + eps0_) - 1 / (1 - eps_)
        # sup of the left side: infinite when the exponent gap is positive,
        # 1 (approached, never attained) when the exponents equalize, 0 beyond.
        if gap > 0:
            attainable = True
        elif gap == 0:
            attainable = rhs < 1
        else:
            attainable = False
        if not attainable:
            threshold = inf
        else:
            lo, hi = mpmath.mpf(2) + mpmath.mpf("1e-30"), mpmath.mpf(4)
            while _admissibility_lhs(hi, eps_, eps0_) < rhs:
                hi *= 2
                if hi > mpmath.mpf("1e300"):
                    attainable = False
                    break
            if not attainable:
                threshold = inf
            else:
                for _ in range(220):
                    mid = (lo + hi) / 2
                    if _admissibility_lhs(mid, eps_, eps0_) < rhs:
                        lo = mid
                    else:
                        hi = mid
                threshold = float(hi)
        return AdmissibilityResult(
            ok=bool(lhs >= rhs),
            lhs=float(lhs),
            rhs=float(rhs),
            threshold=threshold,
            attainable=bool(attainable),
        )


@dataclass(frozen=True)
class Schedule:
    """Full iteration record: trajectory, stopping index, certificates."""

    eps: float
    eps1: float
    alpha0: float
    S0: float
    trajectory: list = dc_field(default_factory=list)
    N: int = 0
    final_exponent: float = 0.0
    certificates: dict = dc_field(default_factory=dict)


def _alpha_requirement(S0: mpmath.mpf, c: mpmath.mpf) -> mpmath.mpf:
    """Smallest exponent a with c * S0^(4/3) * log(S0) <= S0^a."""
    return mpmath.mpf(4) / 3 + (mpmath.log(c) + mpmath.log(mpmath.log(S0))) / mpmath.log(S0)


def run_schedule(eps, eps0, S0, C0=1.0, c=1.0, *, m_hat=1.0, c0=1.0) -> Schedule:
    """Iterate the step from the absorbed initial exponent down to case 2.

    alpha_0 is the smallest value in (4/3, 2] absorbing the initial estimate
    c*S0^(4/3)*log(S0) <= S0^alpha_0 (clamped just above 4/3 when the
    estimate already holds there).  Constants default to 1 for symbolic runs;
    pass measured m_hat, c0, C0 to instantiate the hypotheses numerically.
    """
    cap = eps0 / (1.0 + eps0)
    if not 0.0 < eps < cap:
        raise ValueError(
            f"eps must lie in (0, eps0/(1+eps0)) = (0, {cap:.6g}), got {eps}"
        )
    if S0 <= 2.0:
        raise ValueError(f"S0 must exceed 2, got {S0}")
    with mpmath.workdps(DPS):
        eps_ = _mpf(eps)
        eps1 = eps_ / 2
        S0_ = _mpf(S0)
        c_ = _mpf(c)

        adm0 = admissibility(S0, float(eps1), eps0, m_hat, c0)
        if not adm0:
            raise ValueError(
                "no admissible S0: the negative-part envelope needs "
                f"S0 >= {adm0.threshold:.6g}, got {S0}"
            )
        a_req = _alpha_requirement(S0_, c_)
        if a_req > 2:
            need = _alpha_requirement(S0_, c_)
            lo, hi = S0_, S0_ * 2
            while _alpha_requirement(hi, c_) > 2:
                hi *= 2
            for _ in range(200):
                mid = (lo + hi) / 2
                if _alpha_requirement(mid, c_) > 2:
                    lo = mid
                else:
                    hi = mid
            raise ValueError(
                "no admissible S0: absorbing the initial estimate into S0^2 "
                f"needs S0 >= {float(hi):.6g} (requirement exponent {float(need):.4f})"
            )
        alpha0 = a_req if a_req > mpmath.mpf(4) / 3 else mpmath.mpf(4) / 3 + mpmath.mpf("1e-9")
        clamped = alpha0 != a_req

        crossover = 1 / (1 - eps1)
        alphas = [alpha0]
        Ss = [S0_]
        ratios: list[float] = [float("nan")]
        admissible = [bool(adm0)]
        ratio_cap = 1 - eps1**2 / 2
        ratio_ok = True
        while alphas[-1] > crossover:
            a = alphas[-1]
            S = Ss[-1]
            a_next = a - (a - 1) / 2 * eps1
            S_next = S + (S / 2) ** (1 / (1 - eps1)) - 1
            ratios.append(float(a_next / a))
            if not a_next / a < ratio_cap:
                ratio_ok = False
            alphas.append(a_next)
            Ss.append(S_next)
            admissible.append(bool(admissibility(min(float(S_next), 1e60), float(eps1), eps0, m_hat, c0)))
            if len(alphas) > 100000:
                raise RuntimeError("schedule failed to terminate")
        N = len(alphas) - 1

        # closed form of the recursion, checked against the iterates
        base = 1 - eps1 / 2
        closed_err = max(
            abs(alphas[n] - (1 + (alpha0 - 1) * base**n)) for n in range(N + 1)
        )

        # one more S for the terminal case-2 step
        S_last = Ss[-1] + (Ss[-1] / 2) ** (1 / (1 - eps1)) - 1

        # S large enough that C*S^(1+eps1)*log(S) <= S^(1+eps),
        # i.e. S^(eps-eps1) >= C*log(S)
        C_lump = _mpf(max(C0, 1.0))
        f = lambda s: s ** (eps_ - eps1) - C_lump * mpmath.log(s)
        lo, hi = mpmath.mpf(3), mpmath.mpf(8)
        while f(hi) < 0:
            hi = hi**2
        for _ in range(220):
            mid = mpmath.sqrt(lo * hi)
            if f(mid) < 0:
                lo = mid
            else:
                hi = mid
        final_threshold = hi

        if N >= 1:
            n_bound = (
                ceil(
                    log(float((alpha0 - 1) * (1 - eps1) / eps1))
                    / -log(float(1 - eps1 / 2))
                )
                + 1
            )
        else:
            n_bound = 1
        assert N <= n_bound, (N, n_bound)

        trajectory = [(n, float(Ss[n]), float(alphas[n])) for n in range(N + 1)]
        certificates = {
            "alpha_strictly_decreasing": all(
                alphas[i + 1] < alphas[i] for i in range(N)
            ),
            "ratio_ok": ratio_ok,
            "ratio_cap": float(ratio_cap),
            "ratios": ratios,
            "admissible": admissible,
            "admissible_all": all(admissible),
            "admissibility_threshold_S": adm0.threshold,
            "closed_form_max_err": float(closed_err),
            "N_bound": n_bound,
            "alpha_requirement": float(a_req),
            "alpha0_clamped": clamped,
            "log10_S": [float(mpmath.log10(Ss[n])) for n in range(N + 1)],
            "log10_S_final": float(mpmath.log10(S_last)),
            "final_threshold_S": float(final_threshold),
            "final_ok": bool(S_last >= final_threshold),
            "S_str": [mpmath.nstr(Ss[n], 17) for n in range(N + 1)]
            + [mpmath.nstr(S_last, 17)],
        }
        return Schedule(
            eps=float(eps_),
            eps1=float(eps1),
            alpha0=float(alpha0),
            S0=float(S0_),
            trajectory=trajectory,
            N=N,
            final_exponent=float(1 + eps_),
            certificates=certificates,
        )


def schedule_rows(sched: Schedule) -> list[dict]:
    """Trajectory as CSV-ready rows: n, S_n, alpha_n, ratio, admissible.

    S_n is formatted from the full-precision value so rows stay exact past
    float64 overflow.
    """
    cert = sched.certificates
    rows = []
    for n, S_n, alpha_n in sched.trajectory:
        rows.append(
            {
                "n": n,
                "S_n": cert["S_str"][n],
                "alpha_n": f"{alpha_n:.17g}",
                "ratio": "" if n == 0 else f"{cert['ratios'][n]:.17g}",
                "admissible": str(cert["admissible"][n]).lower(),
            }
        )
    return rows
