"""Privacy bookkeeping: certify the (eps, delta) each group actually gets."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from hetclose import central
from hetclose.dist import Histogram
from hetclose.hadamard import channel_ratio
from hetclose.shuffle import poisson_mu, poisson_mu_bound


@dataclass(frozen=True)
class GroupAudit:
    group: int
    eps: float
    delta: float
    passed: bool
    detail: str


@dataclass(frozen=True)
class AuditReport:
    model: str
    groups: tuple
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.groups)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "passed": self.passed,
            "groups": [asdict(g) for g in self.groups],
            "checks": self.checks,
        }

    def lines(self) -> list[str]:
        out = []
        for g in self.groups:
            status = "PASS" if g.passed else "FAIL"
            out.append(f"group {g.group}: {status} eps={g.eps:.6g} delta={g.delta:.3g} ({g.detail})")
        return out


def _local(eps1, eps2):
    groups = []
    for g, eps in ((1, eps1), (2, eps2)):
        ratio = channel_ratio(eps)
        target = Fraction(math.exp(eps))
        ok = ratio <= target
        groups.append(GroupAudit(g, eps, 0.0, ok, f"randomized-response likelihood ratio {float(ratio):.12g} vs e^eps {float(target):.12g}"))
    return AuditReport("local", tuple(groups))


def _shuffle(model, eps1, eps2, delta, mu1, mu2):
    mu1 = poisson_mu(eps1, delta) if mu1 is None else mu1
    mu2 = poisson_mu(eps2, delta) if mu2 is None else mu2
    groups = []
    for g, eps, mu in ((1, eps1, mu1), (2, eps2, mu2)):
        bound = poisson_mu_bound(eps, delta)
        ok = mu >= bound
        groups.append(GroupAudit(g, eps, delta, ok, f"Poisson noise mean {mu} vs required {bound:.3f}"))
    return AuditReport(model, tuple(groups))


def sigmoid_ratio_spot_check(eps, sensitivity, instances, seed, k_max=10, n_max=20, C1=0.0, C2=0.0):
    """Largest log-ratio of accept or reject probability over random replace-one moves.

    Returns ``(max_log_ratio, max_dz)``.
    """
    gen = np.random.default_rng(seed)
    worst, worst_dz = 0.0, 0
    for _ in range(instances):
        k = int(gen.integers(2, k_max + 1))
        n = int(gen.integers(1, n_max + 1))
        hs = [np.bincount(gen.integers(0, k, size=n), minlength=k) for _ in range(4)]
        z = int(central.central_statistic(*(Histogram(h) for h in hs)))
        which = int(gen.integers(4))
        src = int(gen.choice(np.flatnonzero(hs[which])))
        dst = int(gen.integers(k))
        moved = [h.copy() for h in hs]
        moved[which][src] -= 1
        moved[which][dst] += 1
        z2 = int(central.central_statistic(*(Histogram(h) for h in moved)))
        a = central.privatize(z, 2 * n, eps, C1, C2, sensitivity)
        b = central.privatize(z2, 2 * n, eps, C1, C2, sensitivity)
        lr = max(
            abs(math.log(a.reject_prob) - math.log(b.reject_prob)),
            abs(math.log(a.accept_prob) - math.log(b.accept_prob)),
        )
        worst = max(worst, lr)
        worst_dz = max(worst_dz, abs(z2 - z))
    return worst, worst_dz


def _central(eps1, eps2, n1, n2, sensitivity, spot_checks, seed):
    if n1 is None or n2 is None:
        raise ValueError("central audit needs n1 and n2")
    verified = central.REPLACE_SENSITIVITY
    lr, dz = sigmoid_ratio_spot_check(eps1, sensitivity, spot_checks, seed)
    tol = 1e-9
    g1_ok = sensitivity >= verified and lr <= eps1 + tol
    eps_g1 = eps1 * verified / sensitivity
    g1 = GroupAudit(
        1, eps_g1, 0.0, g1_ok,
        f"divisor {sensitivity} vs replace-one sensitivity {verified}; "
        f"max spot-check log-ratio {lr:.6g} over {spot_checks} moves (max |dZ|={dz})",
    )
    amp = central.amplified_epsilon(eps_g1, n1, n2)
    g2 = GroupAudit(
        2, amp, 0.0, g1_ok and amp <= eps2 + 1e-12,
        f"subsampling {n1} of {n2}: ln(1 + (n1/n2)(e^eps1 - 1)) = {amp:.6g} vs eps2 {eps2}",
    )
    checks = {"spot_check_max_log_ratio": lr, "spot_check_max_dz": dz, "sensitivity_divisor": sensitivity}
    return AuditReport("central", (g1, g2), checks)


def privacy_audit(
    model: str,
    eps1: float,
    eps2: float,
    delta: float = 1e-6,
    *,
    n1: int | None = None,
    n2: int | None = None,
    mu1: int | None = None,
    mu2: int | None = None,
    sensitivity: float = central.REPLACE_SENSITIVITY,
    spot_checks: int = 1000,
    seed: int = 0,
) -> AuditReport:
    """Certify per-group privacy for ``model``.

    Local models check the randomized-response likelihood ratio exactly.
    Shuffle models re-check the Poisson noise bound for the means in use.
    The central model checks the sigmoid divisor against the replace-one
    sensitivity, spot-checks neighbouring instances numerically and applies
    subsampling amplification for group 2.
    """
    if model.startswith("local"):
        return _local(eps1, eps2)
    if model.startswith("shuffle"):
        return _shuffle(model, eps1, eps2, delta, mu1, mu2)
    if model == "central":
        return _central(eps1, eps2, n1, n2, sensitivity, spot_checks, seed)
    raise ValueError(f"unknown model {model!r}")
