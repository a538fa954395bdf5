"""Sequential Monte Carlo execution of the certification protocol.

Runs the n-round CHSH test against pluggable device models, in the standard
mode (test rounds are measured, the rest pass through) or the modified mode
(untested states are projected onto a pair of Jordan blocks and twirled, so
the kept states are Bell-diagonal two-qubit states). Also provides empirical
abort-probability estimates and the statistical checks used to validate the
modified protocol's equivalences.

Randomness: every draw comes from a stream derived from the master seed and a
purpose tag via numpy's SeedSequence, with the round index as the position in
the stream. Identical (model, params, mode, seed) always give identical
transcripts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chsh import Strategy, winning_probability
from .quantum import (
    TwoQubitState,
    ValidationError,
    bell_spectrum,
    block_projectors,
    jordan_blocks,
    twirl,
    werner_state,
)
from .rates import ProtocolParams

# purpose tags for the derived randomness streams
_STREAM_TEST = 0
_STREAM_INPUT = 1
_STREAM_OUTCOME = 2
_STREAM_TWIRL = 3
_STREAM_BLOCK = 4
_STREAM_MODEL = 5
_STREAM_TRIAL = 6
_STREAM_ABORT = 7

_Z95 = 1.959963984540054


class DeviceModel:
    """Base class for sequential devices.

    A model maps (round index, classical history) to this round's source state
    and the two pairs of binary observables. It may consult only the classical
    content of the history: measured states are gone and unmeasured states are
    out of the devices' reach. `iid` marks models whose behavior ignores the
    round and history entirely, which unlocks caching and bulk sampling.
    """

    iid = False
    needs_randomness = False

    def prepare_round(self, i, history, rng):
        raise NotImplementedError


class HonestIIDDevice(DeviceModel):
    """Plays a fixed strategy every round."""

    iid = True

    def __init__(self, strategy: Strategy):
        self.strategy = strategy

    def prepare_round(self, i, history, rng):
        s = self.strategy
        return s.state, s.alice_observables, s.bob_observables

    def exact_score(self) -> float:
        return winning_probability(self.strategy).omega


class ClassicalDeterministicDevice(HonestIIDDevice):
    """Local deterministic table: outputs a_x and b_y regardless of inputs' partner."""

    def __init__(self, a0: int, a1: int, b0: int, b1: int):
        from .chsh import deterministic_strategy

        super().__init__(deterministic_strategy(a0, a1, b0, b1))


class MemorySwitcherDevice(DeviceModel):
    """Alternates two strategies based on the parity of past test rounds."""

    def __init__(self, even_strategy: Strategy, odd_strategy: Strategy):
        self.even_strategy = even_strategy
        self.odd_strategy = odd_strategy

    def prepare_round(self, i, history, rng):
        tests_so_far = sum(1 for r in history if r.t == 1)
        s = self.even_strategy if tests_so_far % 2 == 0 else self.odd_strategy
        return s.state, s.alice_observables, s.bob_observables


class NoisyDriftDevice(DeviceModel):
    """Werner source whose noise grows linearly with the round index."""

    def __init__(self, xi_start: float, xi_slope: float):
        from .chsh import optimal_strategy

        self.xi_start = xi_start
        self.xi_slope = xi_slope
        self._observables = (
            optimal_strategy().alice_observables,
            optimal_strategy().bob_observables,
        )

    def prepare_round(self, i, history, rng):
        xi = min(max(self.xi_start + self.xi_slope * i, 0.0), 1.0)
        return werner_state(xi).matrix, self._observables[0], self._observables[1]


@dataclass
class RoundRecord:
    """Classical registers of one round; None encodes the unset symbol."""

    t: int
    x: int | None = None
    y: int | None = None
    a: int | None = None
    b: int | None = None
    w: int | None = None
    c: int | None = None
    d: int | None = None
    kept_state: TwoQubitState | None = field(default=None, compare=False, repr=False)


@dataclass
class Transcript:
    rounds: list[RoundRecord]
    params: ProtocolParams
    aborted: bool
    win_count: int
    seed: int = 0
    mode: str = "standard"

    def serialize(self) -> str:
        p = self.params
        lines = [
            f"# n={p.n} gamma={p.gamma!r} omega_exp={p.omega_exp!r} "
            f"delta_est={p.delta_est!r} seed={self.seed} mode={self.mode} "
            f"aborted={self.aborted} win_count={self.win_count}",
            "i,t,x,y,a,b,w,c,d",
        ]

        def cell(v):
            return "" if v is None else str(v)

        for i, r in enumerate(self.rounds):
            lines.append(
                f"{i},{r.t},{cell(r.x)},{cell(r.y)},{cell(r.a)},{cell(r.b)},"
                f"{cell(r.w)},{cell(r.c)},{cell(r.d)}"
            )
        return "\n".join(lines) + "\n"


def _stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), purpose]))


def _born_probs(state, alice_obs, bob_obs, x, y):
    """Joint outcome distribution, flattened in order (0,0),(0,1),(1,0),(1,1)."""
    pa = [alice_obs[x].projector(0), alice_obs[x].projector(1)]
    pb = [bob_obs[y].projector(0), bob_obs[y].projector(1)]
    probs = np.empty(4)
    for a in (0, 1):
        for b in (0, 1):
            probs[2 * a + b] = np.trace(np.kron(pa[a], pb[b]) @ state).real
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _sample_discrete(probs, u):
    acc = 0.0
    for k, p in enumerate(probs):
        acc += p
        if u < acc:
            return k
    return len(probs) - 1


class _RoundGeometry:
    """Jordan-block data for one (state, observables) tuple, computed lazily."""

    def __init__(self, state, alice_obs, bob_obs):
        self.state = np.asarray(state, dtype=complex)
        self.alice_obs = alice_obs
        self.bob_obs = bob_obs
        self.da = alice_obs[0].dim
        self.db = bob_obs[0].dim
        self._blocks = None
        self._probs = {}
        self._proj_probs = {}
        self._proj_born = {}
        self._kept = {}

    def born(self, x, y):
        key = (x, y)
        if key not in self._probs:
            self._probs[key] = _born_probs(
                self.state, self.alice_obs, self.bob_obs, x, y
            ).tolist()
        return self._probs[key]

    def blocks(self):
        if self._blocks is None:
            ba = jordan_blocks(*self.alice_obs)
            bb = jordan_blocks(*self.bob_obs)
            qa = block_projectors(ba)
            qb = block_projectors(bb)
            joint = np.empty((len(qa), len(qb)))
            for ci, pc in enumerate(qa):
                for di, qd in enumerate(qb):
                    joint[ci, di] = np.trace(np.kron(pc, qd) @ self.state).real
            joint = np.clip(joint, 0.0, None)
            joint = joint / joint.sum()
            self._blocks = (ba, bb, qa, qb, joint)
        return self._blocks

    def projected_state(self, c, d):
        """Full-space state conditioned on block pair (c, d)."""
        ba, bb, qa, qb, joint = self.blocks()
        key = (c, d)
        if key not in self._proj_probs:
            op = np.kron(qa[c], qb[d])
            rho = op @ self.state @ op
            tr = np.trace(rho).real
            self._proj_probs[key] = rho / tr if tr > 1e-15 else rho
        return self._proj_probs[key]

    def born_projected(self, c, d, x, y):
        key = (c, d, x, y)
        if key not in self._proj_born:
            self._proj_born[key] = _born_probs(
                self.projected_state(c, d), self.alice_obs, self.bob_obs, x, y
            ).tolist()
        return self._proj_born[key]

    def kept_state(self, c, d) -> TwoQubitState:
        """Two-qubit kept state: project onto (c, d), reduce to the block
        bases, and twirl. The twirl unitary is drawn but never recorded, so
        the state given the transcript is the Bell-diagonal average."""
        key = (c, d)
        if key not in self._kept:
            ba, bb, qa, qb, joint = self.blocks()
            rho = self.projected_state(c, d)
            u = ba[c].block_basis.T  # da x 2, columns are the block vectors
            v = bb[d].block_basis.T  # db x 2
            iso = np.kron(u, v)  # (da*db) x 4
            m = iso.conj().T @ rho @ iso
            tr = np.trace(m).real
            if tr <= 1e-15:
                raise ValidationError(f"block pair {key} has vanishing probability")
            self._kept[key] = twirl(TwoQubitState(m / tr))
        return self._kept[key]

    def raw_two_qubit(self) -> TwoQubitState | None:
        if self.da == 2 and self.db == 2:
            return TwoQubitState(self.state)
        return None


def run_protocol(
    model: DeviceModel,
    params: ProtocolParams,
    mode: str = "standard",
    seed: int = 0,
    record_kept_states: bool = True,
    project_test_rounds: bool = False,
) -> Transcript:
    """Execute the n-round protocol sequentially and apply the abort rule.

    In modified mode, non-test rounds measure the Jordan block indices (c, d),
    project accordingly and keep the twirled two-qubit state. With
    `project_test_rounds` the projection is also applied before test-round
    measurements, which must leave the classical statistics unchanged.
    """
    if mode not in ("standard", "modified"):
        raise ValidationError(f"unknown protocol mode {mode!r}")
    n = params.n
    gamma = params.gamma

    test_draws = (_stream(seed, _STREAM_TEST).random(n) < gamma).tolist()
    input_draws = _stream(seed, _STREAM_INPUT).integers(0, 2, size=(n, 2)).tolist()
    outcome_draws = _stream(seed, _STREAM_OUTCOME).random(n).tolist()
    block_draws = _stream(seed, _STREAM_BLOCK).random(n).tolist()
    twirl_draws = _stream(seed, _STREAM_TWIRL).integers(0, 4, size=n).tolist()

    cached_geom = None
    rounds = []
    win_count = 0
    for i in range(n):
        rng = _stream_model(seed, i) if model.needs_randomness else None
        if model.iid and cached_geom is not None:
            geom = cached_geom
        else:
            state, aobs, bobs = model.prepare_round(i, rounds, rng)
            geom = _RoundGeometry(state, aobs, bobs)
            if model.iid:
                cached_geom = geom
        t = 1 if test_draws[i] else 0
        if t:
            x, y = input_draws[i]
            if mode == "modified" and project_test_rounds:
                c, d = _sample_block(geom, block_draws[i])
                probs = geom.born_projected(c, d, x, y)
            else:
                probs = geom.born(x, y)
            k = _sample_discrete(probs, outcome_draws[i])
            a, b = k >> 1, k & 1
            w = 1 if (a ^ b) == (x & y) else 0
            win_count += w
            rounds.append(RoundRecord(t=1, x=x, y=y, a=a, b=b, w=w))
        else:
            if mode == "modified":
                c, d = _sample_block(geom, block_draws[i])
                _ = twirl_draws[i]  # drawn per protocol; the average is kept
                kept = geom.kept_state(c, d) if record_kept_states else None
                rounds.append(RoundRecord(t=0, c=c, d=d, kept_state=kept))
            else:
                kept = geom.raw_two_qubit() if record_kept_states else None
                rounds.append(RoundRecord(t=0, kept_state=kept))

    aborted = win_count < params.threshold
    return Transcript(
        rounds=rounds,
        params=params,
        aborted=aborted,
        win_count=win_count,
        seed=seed,
        mode=mode,
    )


def _stream_model(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), _STREAM_MODEL, i]))


def _sample_block(geom: _RoundGeometry, u: float) -> tuple[int, int]:
    _, _, _, _, joint = geom.blocks()
    k = _sample_discrete(joint.ravel().tolist(), u)
    return k // joint.shape[1], k % joint.shape[1]


def _trial_seed(seed: int, trial: int) -> int:
    ss = np.random.SeedSequence([int(seed), _STREAM_TRIAL, trial])
    return int(ss.generate_state(1)[0])


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """95% score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(center - half, 0.0), min(center + half, 1.0))


def estimate_abort_probability(
    model: DeviceModel,
    params: ProtocolParams,
    trials: int,
    seed: int = 0,
) -> tuple[float, tuple[float, float]]:
    """Empirical abort frequency over independent trials, with a Wilson interval.

    For IID models the per-trial win count is drawn in bulk from its exact
    distribution (a binomial number of test rounds, then binomial wins at the
    model's exact score), which matches a full sequential run in distribution
    at a fraction of the cost. Other models are run round by round.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    threshold = params.threshold
    if model.iid and hasattr(model, "exact_score"):
        omega = model.exact_score()
        rng = _stream(seed, _STREAM_ABORT)
        m = rng.binomial(params.n, params.gamma, size=trials)
        wins = rng.binomial(m, omega)
        aborts = int(np.count_nonzero(wins < threshold))
    else:
        aborts = 0
        for trial in range(trials):
            tr = run_protocol(
                model, params, seed=_trial_seed(seed, trial), record_kept_states=False
            )
            aborts += int(tr.aborted)
    return aborts / trials, wilson_interval(aborts, trials)


def _register_counts(transcripts: list[Transcript]):
    """Counts of each value of the classical registers t, x, y, a, b, w."""
    counts = {name: {} for name in ("t", "x", "y", "a", "b", "w")}
    total = 0
    for tr in transcripts:
        total += len(tr.rounds)
        for r in tr.rounds:
            for name in counts:
                v = getattr(r, name)
                key = "bot" if v is None else v
                counts[name][key] = counts[name].get(key, 0) + 1
    return counts, total


def check_statistics_equivalence(
    model: DeviceModel,
    params: ProtocolParams,
    trials: int,
    seed: int = 0,
) -> dict:
    """Compare classical statistics of standard vs modified runs.

    Both modes run on the same derived seed schedule; the modified runs also
    project before test-round measurements so the comparison exercises the
    projection rather than bypassing it. Marginal frequencies of each register
    must agree within 3 sigma (pooled binomial), and the abort frequencies
    must have overlapping Wilson intervals.
    """
    if trials == 0:
        return {"trials": 0, "passed": True, "registers": {}}
    std, mod = [], []
    for trial in range(trials):
        s = _trial_seed(seed, trial)
        std.append(run_protocol(model, params, "standard", s, record_kept_states=False))
        mod.append(
            run_protocol(
                model,
                params,
                "modified",
                s,
                record_kept_states=False,
                project_test_rounds=True,
            )
        )
    c1, n1 = _register_counts(std)
    c2, n2 = _register_counts(mod)
    registers = {}
    passed = True
    for name in c1:
        values = sorted(set(c1[name]) | set(c2[name]), key=str)
        for v in values:
            f1 = c1[name].get(v, 0) / n1
            f2 = c2[name].get(v, 0) / n2
            pooled = (c1[name].get(v, 0) + c2[name].get(v, 0)) / (n1 + n2)
            sigma = math.sqrt(max(pooled * (1 - pooled), 0.0) * (1 / n1 + 1 / n2))
            ok = abs(f1 - f2) <= 3 * sigma + 1e-12
            registers[f"{name}={v}"] = {
                "standard": f1,
                "modified": f2,
                "sigma": sigma,
                "passed": ok,
            }
            passed = passed and ok
    ab1 = sum(t.aborted for t in std)
    ab2 = sum(t.aborted for t in mod)
    i1 = wilson_interval(ab1, trials)
    i2 = wilson_interval(ab2, trials)
    abort_ok = i1[0] <= i2[1] and i2[0] <= i1[1]
    passed = passed and abort_ok
    return {
        "trials": trials,
        "passed": passed,
        "registers": registers,
        "abort": {"standard": i1, "modified": i2, "passed": abort_ok},
    }


def _chi_square_critical(dof: int, z: float = 1.6448536269514722) -> float:
    """Approximate 95% chi-square quantile (Wilson-Hilferty)."""
    if dof <= 0:
        return 0.0
    t = 2 / (9 * dof)
    return dof * (1 - t + z * math.sqrt(t)) ** 3


def check_kept_state_structure(transcript: Transcript) -> dict:
    """Verify the kept states of a modified-mode transcript.

    Every kept state must be Bell-diagonal, and within each block pair (c, d)
    the spectra must be homogeneous across rounds (chi-square on the spectra),
    i.e. indistinguishable from a round-independent source.
    """
    if transcript.mode != "modified":
        raise ValidationError("kept-state check requires a modified-mode transcript")
    groups: dict[tuple[int, int], list[np.ndarray]] = {}
    for r in transcript.rounds:
        if r.kept_state is None:
            continue
        spec = bell_spectrum(r.kept_state).as_array()
        groups.setdefault((r.c, r.d), []).append(spec)
    report = {"passed": True, "groups": {}}
    for key, specs in groups.items():
        arr = np.array(specs)
        mean = arr.mean(axis=0)
        stat = float(np.sum((arr - mean) ** 2 / (mean + 1e-12)))
        dof = 3 * (len(specs) - 1)
        crit = _chi_square_critical(dof)
        ok = stat <= crit + 1e-12
        report["groups"][key] = {
            "rounds": len(specs),
            "mean_spectrum": mean.tolist(),
            "chi_square": stat,
            "critical": crit,
            "passed": ok,
        }
        report["passed"] = report["passed"] and ok
    return report
