"""Grand-canonical Markov chain Monte Carlo for the loop gas.

The chain lives on finite loop configurations in a box and targets the
unnormalised density z^K / L * exp(-h) relative to the reference measure
(Lebesgue anchors, multiplicity-summed bridge laws).  Three reversible update
families drive it: insertion/deletion of whole loops, merge/split of two
same-type loops into one of combined multiplicity (the permutation-cycle
move), and redrawing single legs.  Confinement to the box is enforced on the
sampled grid.
"""

import json
import math
from dataclasses import dataclass, field
from itertools import permutations, product as iproduct

import numpy as np

from . import loops as lps
from .bridge import (BridgePath, bridge_mass, log_bridge_mass, resample_leg,
                     sample_bridge)
from .loops import Loop, LoopConfig, OpenPath, interaction_energy


@dataclass
class SamplerOptions:
    slices_per_beta: int = 32
    k_max: int = 20
    move_weights: tuple = (4, 2, 4)  # insert/delete, merge/split, leg redraw
    conservative_hard_core: bool = False
    audit_interval: int = 0  # sweeps between cache audits; 0 disables
    proposals_per_sweep: int = 0  # 0: scale with the current loop count


@dataclass
class MoveStats:
    proposed: int = 0
    accepted: int = 0

    def rate(self):
        return self.accepted / self.proposed if self.proposed else 0.0


class Chain:
    """One Markov chain over loop configurations.

    All randomness flows through the chain's numpy Generator, so a seed fixes
    the trajectory bit for bit.
    """

    def __init__(self, params, box, external=None, options=None, seed=None, rng=None):
        self.params = params
        self.box = box
        self.opts = options or SamplerOptions()
        if rng is None:
            rng = np.random.default_rng(seed)
        self.rng = rng
        self.config = LoopConfig(box, self.opts.slices_per_beta, [], external)
        self.sweeps_done = 0
        self.stats = {"insert_delete": MoveStats(), "merge_split": MoveStats(),
                      "redraw": MoveStats()}
        self._h = 0.0
        w = np.asarray(self.opts.move_weights, dtype=float)
        self._move_cdf = np.cumsum(w) / np.sum(w)
        self._log_volume = math.log(box.volume)

    # -- cached quantities ---------------------------------------------------

    @property
    def energy(self):
        return self._h

    def audit(self, tol=1e-8):
        """Recompute the energy cache from scratch and compare."""
        h = interaction_energy(self.config.loops, self.params,
                               external=self.config.external,
                               conservative=self.opts.conservative_hard_core)
        drift = abs(h - self._h)
        if drift > tol * max(1.0, abs(h)):
            raise RuntimeError("energy cache drift %.3e after %d sweeps"
                               % (drift, self.sweeps_done))
        self._h = h
        return drift

    def _others(self, exclude):
        ids = {id(o) for o in exclude}
        return [lp for lp in self.config.loops if id(lp) not in ids]

    def _delta_energy(self, target, exclude=()):
        if self.params.is_free() and (self.config.external is None
                                      or self.config.external.is_empty()):
            return 0.0
        return interaction_energy(list(target), self.params,
                                  conditioning=self._others(exclude),
                                  external=self.config.external,
                                  conservative=self.opts.conservative_hard_core)

    # -- update families -----------------------------------------------------

    def step_insert_delete(self):
        st = self.stats["insert_delete"]
        st.proposed += 1
        rng = self.rng
        params = self.params
        q = params.n_types
        k_max = self.opts.k_max
        n = len(self.config.loops)
        if rng.random() < 0.5:
            # insertion
            j = int(rng.integers(q))
            k = int(rng.integers(1, k_max + 1))
            c = np.asarray(self.box.center)
            x = c + (rng.random(self.box.dimension) * 2.0 - 1.0) * self.box.half_side
            path = sample_bridge(x, x, k, self.opts.slices_per_beta,
                                 params.beta, rng)
            loop = Loop(j, path)
            if not lps.confined_to_box([loop], self.box):
                return False
            dh = self._delta_energy([loop])
            if math.isinf(dh):
                return False
            log_ratio = (k * math.log(params.fugacity[j]) - math.log(k)
                         + log_bridge_mass(x, x, k, params.beta) - dh
                         + math.log(q) + self._log_volume + math.log(k_max)
                         - math.log(n + 1))
            if log_ratio >= 0 or rng.random() < math.exp(log_ratio):
                self.config.loops.append(loop)
                self._h += dh
                st.accepted += 1
                return True
            return False
        # deletion
        if n == 0:
            return False
        idx = int(rng.integers(n))
        loop = self.config.loops[idx]
        dh = self._delta_energy([loop], exclude=[loop])
        k, j = loop.k, loop.type_index
        x = loop.anchor
        log_ratio = (-k * math.log(params.fugacity[j]) + math.log(k)
                     - log_bridge_mass(x, x, k, params.beta) + dh
                     - math.log(q) - self._log_volume - math.log(k_max)
                     + math.log(n))
        if log_ratio >= 0 or rng.random() < math.exp(log_ratio):
            self.config.loops.pop(idx)
            self._h -= dh
            st.accepted += 1
            return True
        return False

    def step_redraw(self):
        st = self.stats["redraw"]
        st.proposed += 1
        rng = self.rng
        n = len(self.config.loops)
        if n == 0:
            return False
        idx = int(rng.integers(n))
        old = self.config.loops[idx]
        m = int(rng.integers(old.k))
        new_path = resample_leg(old.path, m, rng)
        new = Loop(old.type_index, new_path)
        if not lps.confined_to_box([new], self.box):
            return False
        e_old = self._delta_energy([old], exclude=[old])
        e_new = self._delta_energy([new], exclude=[old])
        if math.isinf(e_new):
            return False
        log_ratio = -(e_new - e_old)
        if log_ratio >= 0 or rng.random() < math.exp(log_ratio):
            self.config.loops[idx] = new
            self._h += e_new - e_old
            st.accepted += 1
            return True
        return False

    def _ordered_pair_count(self):
        counts = self.config.type_counts(self.params.n_types)
        return sum(c * (c - 1) for c in counts), counts

    def _pick_ordered_pair(self, n_pairs, counts):
        """Uniform ordered pair of distinct same-type loops."""
        r = int(self.rng.integers(n_pairs))
        for j, c in enumerate(counts):
            block = c * (c - 1)
            if r < block:
                of_type = [lp for lp in self.config.loops if lp.type_index == j]
                a = r // (c - 1)
                b = r % (c - 1)
                if b >= a:
                    b += 1
                return of_type[a], of_type[b]
            r -= block
        raise AssertionError("pair selection out of range")

    def step_merge_split(self):
        st = self.stats["merge_split"]
        st.proposed += 1
        if self.rng.random() < 0.5:
            ok = self._try_merge()
        else:
            ok = self._try_split()
        if ok:
            st.accepted += 1
        return ok

    def _try_merge(self):
        rng = self.rng
        S = self.opts.slices_per_beta
        beta = self.params.beta
        n_pairs, counts = self._ordered_pair_count()
        if n_pairs == 0:
            return False
        A, B = self._pick_ordered_pair(n_pairs, counts)
        k1, k2 = A.k, B.k
        k = k1 + k2
        if k > self.opts.k_max:
            return False
        x1, x2 = A.anchor, B.anchor
        uA = A.samples[(k1 - 1) * S]
        uB = B.samples[(k2 - 1) * S]
        conn1 = sample_bridge(uA, x2, 1, S, beta, rng)
        conn2 = sample_bridge(uB, x1, 1, S, beta, rng)
        samples = np.concatenate([
            A.samples[: (k1 - 1) * S + 1],
            conn1.samples[1:],
            B.samples[1: (k2 - 1) * S + 1],
            conn2.samples[1:],
        ])
        path = BridgePath(samples=samples, k=k, slices_per_beta=S, beta=beta)
        merged = Loop(A.type_index, path)
        if not lps.confined_to_box([merged], self.box):
            return False
        e_old = self._delta_energy([A, B], exclude=[A, B])
        e_new = self._delta_energy([merged], exclude=[A, B])
        if math.isinf(e_new):
            return False
        log_g = (self._log_leg_gauss(uA, x2) + self._log_leg_gauss(uB, x1)
                 - self._log_leg_gauss(uA, x1) - self._log_leg_gauss(uB, x2))
        n_after = len(self.config.loops) - 1
        log_ratio = (math.log(k1 * k2 / k) + log_g - (e_new - e_old)
                     + math.log(n_pairs) - math.log(n_after * (k - 1)))
        if log_ratio >= 0 or rng.random() < math.exp(log_ratio):
            self.config.loops.remove(A)
            self.config.loops.remove(B)
            self.config.loops.append(merged)
            self._h += e_new - e_old
            return True
        return False

    def _try_split(self):
        rng = self.rng
        S = self.opts.slices_per_beta
        beta = self.params.beta
        n = len(self.config.loops)
        if n == 0:
            return False
        idx = int(rng.integers(n))
        old = self.config.loops[idx]
        k = old.k
        if k < 2:
            return False
        m = int(rng.integers(1, k))
        x1 = old.anchor
        u = old.samples[m * S]
        close1 = sample_bridge(old.samples[(m - 1) * S], x1, 1, S, beta, rng)
        close2 = sample_bridge(old.samples[(k - 1) * S], u, 1, S, beta, rng)
        s1 = np.concatenate([old.samples[: (m - 1) * S + 1], close1.samples[1:]])
        s2 = np.concatenate([old.samples[m * S: (k - 1) * S + 1], close2.samples[1:]])
        loop1 = Loop(old.type_index,
                     BridgePath(samples=s1, k=m, slices_per_beta=S, beta=beta))
        loop2 = Loop(old.type_index,
                     BridgePath(samples=s2, k=k - m, slices_per_beta=S, beta=beta))
        if not lps.confined_to_box([loop1, loop2], self.box):
            return False
        e_old = self._delta_energy([old], exclude=[old])
        e_new = self._delta_energy([loop1, loop2], exclude=[old])
        if math.isinf(e_new):
            return False
        log_g = (self._log_leg_gauss(old.samples[(m - 1) * S], x1)
                 + self._log_leg_gauss(old.samples[(k - 1) * S], u)
                 - self._log_leg_gauss(old.samples[(m - 1) * S], u)
                 - self._log_leg_gauss(old.samples[(k - 1) * S], x1))
        # ordered same-type pairs after the split
        counts = self.config.type_counts(self.params.n_types)
        counts[old.type_index] += 1
        n_pairs_after = sum(c * (c - 1) for c in counts)
        log_ratio = (math.log(k / (m * (k - m))) + log_g - (e_new - e_old)
                     + math.log(n * (k - 1)) - math.log(n_pairs_after))
        if log_ratio >= 0 or rng.random() < math.exp(log_ratio):
            self.config.loops.pop(idx)
            self.config.loops.extend([loop1, loop2])
            self._h += e_new - e_old
            return True
        return False

    def _log_leg_gauss(self, u, v):
        d = float(np.sum((np.asarray(u) - np.asarray(v)) ** 2))
        return -d / (2.0 * self.params.beta)

    # -- driving -------------------------------------------------------------

    def step(self):
        r = self.rng.random()
        if r < self._move_cdf[0]:
            return self.step_insert_delete()
        if r < self._move_cdf[1]:
            return self.step_merge_split()
        return self.step_redraw()

    def sweep(self):
        n = self.opts.proposals_per_sweep
        if n <= 0:
            n = max(16, 2 * len(self.config.loops))
        for _ in range(n):
            self.step()
        self.sweeps_done += 1
        if self.opts.audit_interval and self.sweeps_done % self.opts.audit_interval == 0:
            self.audit()

    def run(self, n_sweeps):
        for _ in range(n_sweeps):
            self.sweep()

    def snapshot(self):
        return list(self.config.loops)


# -- checkpointing -------------------------------------------------------------

_CKPT_TAG = "loopgas-checkpoint 1"


def save_checkpoint(chain, path):
    """Write sweeps, RNG state, and the configuration for bit-exact restart."""
    state = {
        "sweeps": chain.sweeps_done,
        "rng": chain.rng.bit_generator.state,
    }
    with open(path, "w") as fh:
        fh.write(_CKPT_TAG + "\n")
        fh.write(json.dumps(state) + "\n")
        fh.write(lps.dumps_config(chain.config))


def load_checkpoint(path, params, options=None):
    with open(path) as fh:
        tag = fh.readline().strip()
        if tag != _CKPT_TAG:
            raise ValueError("unrecognised checkpoint header")
        state = json.loads(fh.readline())
        config = lps.loads_config(fh.read(), max_range=params.max_range)
    chain = Chain(params, config.box, external=config.external, options=options)
    chain.config = config
    chain.sweeps_done = state["sweeps"]
    chain.rng.bit_generator.state = state["rng"]
    chain._h = interaction_energy(config.loops, params, external=config.external,
                                  conservative=chain.opts.conservative_hard_core)
    return chain


# -- estimators ----------------------------------------------------------------


def batch_means(values, n_batches=16):
    """Mean and batch-means standard error of a 1-d sample sequence."""
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n < n_batches:
        return float(np.mean(arr)) if n else 0.0, math.inf
    usable = (n // n_batches) * n_batches
    blocks = arr[:usable].reshape(n_batches, -1).mean(axis=1)
    se = float(np.std(blocks, ddof=1) / math.sqrt(n_batches))
    return float(np.mean(arr[:usable])), se


@dataclass
class KernelEstimate:
    value: float
    std_error: float
    n_samples: int
    truncation_bound: float
    status: str = "ok"
    meta: dict = field(default_factory=dict)


def _endpoint_tables(starts, ends, params, k_max):
    """Per type: permutations and per-leg multiplicity weight tables.

    weights[j][(l, t)] is the vector over k = 1..k_max of z^k times the
    bridge mass from start l to end t of type j; its sum is the exact leg
    weight and its normalisation is the importance law for k.
    """
    tables = []
    all_perms = []
    for j in range(params.n_types):
        xs = np.asarray(starts[j], dtype=float)
        ys = np.asarray(ends[j], dtype=float)
        n = xs.shape[0]
        table = {}
        for l in range(n):
            for t in range(n):
                w = np.array([params.fugacity[j] ** k
                              * bridge_mass(xs[l], ys[t], k, params.beta)
                              for k in range(1, k_max + 1)])
                table[(l, t)] = w
        tables.append(table)
        all_perms.append(list(permutations(range(n))))
    return tables, all_perms


def _sample_path_product(tables, all_perms, combo, starts, ends, params, S,
                         k_max, rng):
    """Draw one path per leg for a fixed permutation combo.

    Returns (paths, log_weight_product) where the weight product is the exact
    sum over multiplicities per leg (the sampled k is importance-corrected).
    """
    paths = []
    weight = 1.0
    for j, sigma in enumerate(combo):
        xs = np.asarray(starts[j], dtype=float)
        ys = np.asarray(ends[j], dtype=float)
        for l, t in enumerate(sigma):
            w = tables[j][(l, t)]
            W = float(np.sum(w))
            if W <= 0.0:
                return None, 0.0
            pk = w / W
            k = 1 + int(rng.choice(len(pk), p=pk))
            path = sample_bridge(xs[l], ys[t], k, S, params.beta, rng)
            paths.append(OpenPath(j, path))
            weight *= W
    return paths, weight


def _truncation_bound_paths(starts, params, k_max, n_combos):
    """Bound on the weight missed by the multiplicity cutoff.

    Per leg the missing mass is at most (2 pi beta)^(-d/2) z^(K+1)/(1-z);
    summed over legs and multiplied by the number of permutation combos.
    """
    bound = 0.0
    for j, xs in enumerate(starts):
        xs = np.asarray(xs, dtype=float)
        if xs.size == 0:
            continue
        d = xs.shape[1]
        z = params.fugacity[j]
        per_leg = (2.0 * math.pi * params.beta) ** (-0.5 * d) \
            * z ** (k_max + 1) / (1.0 - z)
        bound += xs.shape[0] * per_leg
    return bound * max(1, n_combos)


def _counts_match(starts, ends):
    return all(np.asarray(s).shape == np.asarray(e).shape
               for s, e in zip(starts, ends))


def estimate_reference_kernel(starts, ends, params, box0, k_max=20, S=32,
                              n_samples=2000, n_batches=16, rng=None):
    """Monte Carlo value of the free multiplicity-summed kernel with exclusion.

    Product over types of permutation sums; each matched endpoint pair
    carries sum_k z^k (bridge mass), and sampled bridges are accepted only
    when they avoid box0 at their interior whole-beta times.  No interaction
    and no background enter.  Mismatched per-type endpoint counts give the
    exact zero estimate.
    """
    if rng is None:
        rng = np.random.default_rng()
    if not _counts_match(starts, ends):
        return KernelEstimate(0.0, 0.0, 0, 0.0, meta={"reason": "cardinality mismatch"})
    tables, all_perms = _endpoint_tables(starts, ends, params, k_max)
    combos = list(iproduct(*all_perms))
    vals = np.empty(n_samples)
    for i in range(n_samples):
        total = 0.0
        for combo in combos:
            paths, weight = _sample_path_product(tables, all_perms, combo,
                                                 starts, ends, params, S,
                                                 k_max, rng)
            if paths is None:
                continue
            if lps.avoids_box_at_step_times(paths, box0):
                total += weight
        vals[i] = total
    value, se = batch_means(vals, n_batches)
    tb = _truncation_bound_paths(starts, params, k_max, len(combos))
    return KernelEstimate(value, se, n_samples, tb,
                          meta={"k_max": k_max, "S": S})


def estimate_rdm_kernel(chain, starts, ends, box0, n_snapshots=400, thin=2,
                        inner_per_snapshot=4, n_batches=16, apply_exclusion=True,
                        S=None, k_max=None):
    """Nested Monte Carlo for the reduced-kernel of the interacting gas.

    Outer level: configurations of the surrounding loop gas drawn from the
    running chain.  Inner level: open paths joining the pinned endpoints,
    with permutations enumerated, multiplicities importance-sampled under
    the per-leg mass weights, and bridges sampled from the exact bridge law.
    Each term carries confinement, the exclusion indicators on box0 (paths,
    background anchors, and background whole-step visits), and the Boltzmann
    factor of the path energy given background and external points.

    With apply_exclusion=False the box0 indicators are skipped; this
    diagnostic mode turns the estimator into the plain reduced-kernel of the
    gas and, for the free gas, into the closed-form multiplicity sum.
    """
    params = chain.params
    rng = chain.rng
    S = S or chain.opts.slices_per_beta
    k_max = k_max or chain.opts.k_max
    free = params.is_free()
    if S != chain.opts.slices_per_beta and not free:
        raise ValueError("path slice count must match the chain's grid "
                         "unless the model is free")
    if not _counts_match(starts, ends):
        return KernelEstimate(0.0, 0.0, 0, 0.0, meta={"reason": "cardinality mismatch"})
    tables, all_perms = _endpoint_tables(starts, ends, params, k_max)
    combos = list(iproduct(*all_perms))
    ext = chain.config.external
    vals = np.empty(n_snapshots)
    for snap in range(n_snapshots):
        chain.run(thin)
        background = chain.snapshot()
        bg_ok = True
        if apply_exclusion:
            anchors_clear = all(not box0.contains(lp.anchor) for lp in background)
            bg_ok = anchors_clear and lps.avoids_box_at_step_times(background, box0)
        if not bg_ok:
            vals[snap] = 0.0
            continue
        acc = 0.0
        for _ in range(inner_per_snapshot):
            for combo in combos:
                paths, weight = _sample_path_product(tables, all_perms, combo,
                                                     starts, ends, params, S,
                                                     k_max, rng)
                if paths is None:
                    continue
                if not lps.confined_to_box(paths, chain.box):
                    continue
                if apply_exclusion and not lps.avoids_box_at_step_times(paths, box0):
                    continue
                if free:
                    h = 0.0
                else:
                    h = interaction_energy(paths, params, conditioning=background,
                                           external=ext,
                                           conservative=chain.opts.conservative_hard_core)
                    if math.isinf(h):
                        continue
                acc += weight * math.exp(-h)
        vals[snap] = acc / inner_per_snapshot
    value, se = batch_means(vals, n_batches)
    status = "ok" if n_snapshots >= n_batches else "insufficient_samples"
    tb = _truncation_bound_paths(starts, params, k_max, len(combos))
    return KernelEstimate(value, se, n_snapshots, tb, status,
                          meta={"k_max": k_max, "S": S,
                                "box": chain.box.half_side})


@dataclass
class DensityEstimate:
    per_type: list
    std_errors: list
    histogram: dict
    n_snapshots: int
    window_volume: float
    warning: str = ""


def estimate_density(chain, window, n_sweeps, thin=1, n_batches=16):
    """Anchor density per type in a window, with multiplicity histogram.

    A window that crowds the home box closer than the interaction range
    picks up boundary suppression; that is reported as a warning flag on
    the result rather than an error.
    """
    margin = chain.box.half_side - (max(abs(np.asarray(window.center)
                                            - np.asarray(chain.box.center)))
                                    + window.half_side)
    warning = ""
    if margin < chain.params.max_range:
        warning = ("window margin %.3g below interaction range %.3g; "
                   "boundary suppression may bias the estimate"
                   % (margin, chain.params.max_range))
    q = chain.params.n_types
    n_snap = n_sweeps // thin
    counts = np.zeros((n_snap, q))
    hist = {}
    for i in range(n_snap):
        chain.run(thin)
        for lp in chain.config.loops:
            if window.contains(lp.anchor):
                counts[i, lp.type_index] += 1
                hist[lp.k] = hist.get(lp.k, 0) + 1
    vol = window.volume
    vals, ses = [], []
    for j in range(q):
        v, se = batch_means(counts[:, j] / vol, n_batches)
        vals.append(v)
        ses.append(se)
    return DensityEstimate(vals, ses, hist, n_snap, vol, warning)


@dataclass
class TailEstimate:
    k0: int
    probability: float
    std_error: float
    n_snapshots: int


def estimate_multiplicity_tail(chain, box0, k0_list, n_sweeps, thin=1,
                               n_batches=16):
    """P(some type's total multiplicity among box0-anchored loops >= k0)."""
    q = chain.params.n_types
    n_snap = n_sweeps // thin
    indicators = np.zeros((n_snap, len(k0_list)))
    for i in range(n_snap):
        chain.run(thin)
        K = np.zeros(q)
        for lp in chain.config.loops:
            if box0.contains(lp.anchor):
                K[lp.type_index] += lp.k
        top = K.max() if q else 0.0
        for c, k0 in enumerate(k0_list):
            indicators[i, c] = 1.0 if top >= k0 else 0.0
    out = []
    for c, k0 in enumerate(k0_list):
        p, se = batch_means(indicators[:, c], n_batches)
        out.append(TailEstimate(int(k0), p, se, n_snap))
    return out


@dataclass
class ProbeReport:
    densities_base: list
    densities_shifted: list
    diff_std_errors: list
    histogram_base: dict
    histogram_shifted: dict
    consistent: bool
    max_sigma: float
    note: str = ("empirical consistency check between congruent windows; "
                 "agreement supports translation invariance but proves nothing")


def shift_invariance_probe(chain, box0, shift, n_sweeps, thin=1, n_batches=16,
                           sigma_level=3.0):
    """Compare loop statistics between box0 and its shifted copy.

    Densities per type and multiplicity histograms are accumulated in both
    windows from the same trajectory; differences are judged against their
    joint batch-means errors.  Raises when either window crowds the boundary
    closer than the interaction range plus three thermal lengths.
    """
    params = chain.params
    box = chain.box
    shifted = box0.shifted(shift)
    need = params.max_range + 3.0 * math.sqrt(params.beta)
    for w in (box0, shifted):
        margin = box.half_side - (max(abs(np.asarray(w.center)
                                          - np.asarray(box.center)))
                                  + w.half_side)
        if margin < need:
            raise ValueError("window margin %.3g below range plus thermal length %.3g"
                             % (margin, need))
    q = params.n_types
    n_snap = n_sweeps // thin
    base = np.zeros((n_snap, q))
    shif = np.zeros((n_snap, q))
    hist_b, hist_s = {}, {}
    for i in range(n_snap):
        chain.run(thin)
        for lp in chain.config.loops:
            if box0.contains(lp.anchor):
                base[i, lp.type_index] += 1
                hist_b[lp.k] = hist_b.get(lp.k, 0) + 1
            if shifted.contains(lp.anchor):
                shif[i, lp.type_index] += 1
                hist_s[lp.k] = hist_s.get(lp.k, 0) + 1
    vol = box0.volume
    dens_b, dens_s, dses = [], [], []
    worst = 0.0
    ok = True
    for j in range(q):
        vb, _ = batch_means(base[:, j] / vol, n_batches)
        vs, _ = batch_means(shif[:, j] / vol, n_batches)
        _, se_d = batch_means((base[:, j] - shif[:, j]) / vol, n_batches)
        dens_b.append(vb)
        dens_s.append(vs)
        dses.append(se_d)
        if se_d > 0:
            worst = max(worst, abs(vb - vs) / se_d)
            if abs(vb - vs) > sigma_level * se_d:
                ok = False
    # histogram comparison on bins with enough pooled mass
    total_b = sum(hist_b.values()) or 1
    total_s = sum(hist_s.values()) or 1
    for k in sorted(set(hist_b) | set(hist_s)):
        nb, ns = hist_b.get(k, 0), hist_s.get(k, 0)
        if nb + ns < 25:
            continue
        fb, fs = nb / total_b, ns / total_s
        # crude binomial errors; snapshots decorrelate within batches
        se = math.sqrt(fb * (1 - fb) / total_b + fs * (1 - fs) / total_s)
        if se > 0:
            worst = max(worst, abs(fb - fs) / (sigma_level * se) * sigma_level)
            if abs(fb - fs) > sigma_level * se:
                ok = False
    return ProbeReport(dens_b, dens_s, dses, hist_b, hist_s, ok, worst)
