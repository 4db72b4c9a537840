"""Equal-size good/poor user pairing.

The main estimator is :class:`MomaClusterer`, an object-migration automaton
in which each user owns a state index ``delta`` in ``1..K*W``. User ``i``
belongs to cluster ``ceil(delta_i / W)``; within a cluster the state with
offset 1 is innermost and offset ``W`` is the boundary. Queries pairing a
good user with a poor user pull co-clustered users inward and push split
pairs outward; two boundary users are merged by a swap, which keeps every
cluster at exactly one good and one poor user.

:class:`OracleMatching` (exhaustive min-distance matching) and
:class:`EqualSizeKMeans` are provided as reference and complexity baseline.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .channel import GOOD, POOR
from .numerics import make_rng

MAX_ORACLE_CLUSTERS = 8


class DegenerateFeatureWarning(UserWarning):
    """A feature dimension had zero spread and was dropped."""


class ComplexityGuardError(ValueError):
    pass


# -- features ---------------------------------------------------------------


class ZeroMeanNormalizer(TransformerMixin, BaseEstimator):
    """Per-column ``(v - mean) / std`` with the population std.

    Columns with zero spread cannot be normalised; they are dropped with a
    :class:`DegenerateFeatureWarning` and ``kept_`` records the survivors.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)
        self.kept_ = self.scale_ > 0
        if not np.all(self.kept_):
            warnings.warn(
                f"dropping zero-variance feature columns {np.flatnonzero(~self.kept_).tolist()}",
                DegenerateFeatureWarning,
                stacklevel=2,
            )
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "kept_")
        X = check_array(X, dtype=float)
        Z = (X[:, self.kept_] - self.mean_[self.kept_]) / self.scale_[self.kept_]
        return Z


def normalize_features(positions, gains):
    """Stack ``(x, y, g)`` per user and z-score each column."""
    X = np.column_stack([np.asarray(positions, dtype=float), np.asarray(gains, dtype=float)])
    return ZeroMeanNormalizer().fit_transform(X)


def pair_distance(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"feature vectors differ in shape: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def cross_distances(features, groups):
    """Distance matrix with rows = good users, cols = poor users (in id order)."""
    features = np.asarray(features, dtype=float)
    groups = np.asarray(groups)
    good = np.flatnonzero(groups == GOOD)
    poor = np.flatnonzero(groups == POOR)
    diff = features[good][:, None, :] - features[poor][None, :, :]
    return good, poor, np.sqrt(np.sum(diff**2, axis=2))


# -- queries ----------------------------------------------------------------


@dataclass(frozen=True)
class Query:
    p: int
    q: int

    def __post_init__(self):
        if self.p == self.q:
            raise ValueError("a query needs two distinct users")


def query_probabilities(dist_row, temperature):
    """Poor-partner distribution for one good user.

    Distances are measured in units of that good user's nearest cross-group
    distance before the exponential weighting, so the sharpness does not
    depend on the overall scale of the instance.
    """
    d = np.asarray(dist_row, dtype=float)
    nearest = d.min()
    if nearest > 0:
        logits = -(d / nearest) / temperature
    else:
        logits = np.where(d == 0, 0.0, -np.inf)
    w = np.exp(logits - logits.max())
    return w / w.sum()


def generate_queries(features, groups, rng, count, temperature=0.2):
    """Yield ``count`` cross-group queries.

    Good users are visited round-robin; each is paired with a poor user
    drawn with probability proportional to ``exp(-relative_distance / T)``.
    Same-group pairs are never produced.
    """
    rng = make_rng(rng)
    good, poor, dist = cross_distances(features, groups)
    if len(good) == 0 or len(poor) == 0:
        raise ValueError("need at least one good and one poor user")
    probs = np.array([query_probabilities(row, temperature) for row in dist])
    cum = np.cumsum(probs, axis=1)
    for t in range(count):
        g = t % len(good)
        u = rng.random()
        j = min(int(np.searchsorted(cum[g], u * cum[g, -1], side="right")), len(poor) - 1)
        yield Query(int(good[g]), int(poor[j]))


def well_separated_pairs(num_pairs, rng, ratio=3.0, dim=3, max_tries=60):
    """Synthetic normalised features whose natural pairing is unambiguous.

    Pair centres are uniform in the unit cube and the two members sit
    symmetrically around their centre. After zero-mean normalisation the
    smallest distance between users of different pairs is at least
    ``ratio`` times the largest within-pair distance; the pair radius is
    halved until that holds.

    Returns ``(features, groups, labels)`` where user ``2c`` (good) and
    ``2c + 1`` (poor) form pair ``c``.
    """
    rng = make_rng(rng)
    k = int(num_pairs)
    if k < 1:
        raise ValueError("need at least one pair")
    centers = rng.random((k, dim))
    u = rng.standard_normal((k, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    if k > 1:
        cd = np.linalg.norm(centers[:, None] - centers[None], axis=2)
        r = cd[np.triu_indices(k, 1)].min() / (2.0 * (ratio + 1.0))
    else:
        r = 0.1
    groups = np.tile([GOOD, POOR], k)
    labels = np.repeat(np.arange(k), 2)
    for _ in range(max_tries):
        raw = np.empty((2 * k, dim))
        raw[0::2] = centers + r * u
        raw[1::2] = centers - r * u
        feats = ZeroMeanNormalizer().fit_transform(raw)
        if k == 1:
            return feats, groups, labels
        d = np.linalg.norm(feats[:, None] - feats[None], axis=2)
        same = labels[:, None] == labels[None]
        intra = d[same & ~np.eye(2 * k, dtype=bool)].max()
        inter = d[~same].min()
        if inter >= ratio * intra:
            return feats, groups, labels
        r *= 0.5
    raise RuntimeError("could not build a separated instance")


# -- automaton --------------------------------------------------------------


@dataclass
class AutomatonState:
    """State indices ``delta`` (1-based) for ``K`` actions of depth ``W``."""

    delta: np.ndarray
    depth: int
    num_actions: int

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=int).copy()
        if self.depth < 2:
            raise ValueError("automaton depth W must be >= 2")
        if np.any(self.delta < 1) or np.any(self.delta > self.depth * self.num_actions):
            raise ValueError("state indices must lie in [1, K*W]")

    def cluster_of(self, i):
        return (int(self.delta[i]) - 1) // self.depth

    def offset(self, i):
        """1 = innermost, W = boundary."""
        return (int(self.delta[i]) - 1) % self.depth + 1

    def labels(self):
        return (self.delta - 1) // self.depth

    def copy(self):
        return AutomatonState(self.delta.copy(), self.depth, self.num_actions)


def initial_state(groups, depth, rng):
    """Random one-good-one-poor assignment with every user on its boundary state."""
    rng = make_rng(rng)
    groups = np.asarray(groups)
    good = np.flatnonzero(groups == GOOD)
    poor = np.flatnonzero(groups == POOR)
    k = len(good)
    if len(poor) != k:
        raise ValueError("equal-size pairing needs as many good as poor users")
    delta = np.empty(len(groups), dtype=int)
    delta[good] = (rng.permutation(k) + 1) * depth
    delta[poor] = (rng.permutation(k) + 1) * depth
    return AutomatonState(delta, depth, k)


def moma_step(state, query):
    """Apply one query to a copy of ``state`` and return it."""
    s = state.copy()
    p, q = query.p, query.q
    w = s.depth
    if s.cluster_of(p) == s.cluster_of(q):
        # reward: both move towards the innermost state, staying put there
        if s.offset(p) != 1:
            s.delta[p] -= 1
        if s.offset(q) != 1:
            s.delta[q] -= 1
        return s

    p_edge = s.offset(p) == w
    q_edge = s.offset(q) == w
    if not p_edge and not q_edge:
        s.delta[p] += 1
        s.delta[q] += 1
    elif not p_edge:
        s.delta[p] += 1
    elif not q_edge:
        s.delta[q] += 1
    else:
        # both on a boundary: p joins q's cluster, displacing the member of
        # q's cluster (other than q) that sits closest to the boundary
        cq = s.cluster_of(q)
        members = [i for i in range(len(s.delta)) if i not in (p, q) and s.cluster_of(i) == cq]
        l = max(members, key=lambda i: (s.offset(i), -i))
        temp = s.delta[p]
        s.delta[p] = s.delta[q]
        s.delta[l] = temp
    return s


# -- assignments ------------------------------------------------------------


def labels_from_pairs(pairs, n_users):
    labels = np.full(n_users, -1, dtype=int)
    for c, (g, p) in enumerate(pairs):
        labels[g] = c
        labels[p] = c
    return labels


def mates(labels):
    """Clustermate of each user (clusters must have exactly two members)."""
    labels = np.asarray(labels)
    out = np.empty(len(labels), dtype=int)
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if len(members) != 2:
            raise ValueError(f"cluster {c} has {len(members)} members, expected 2")
        out[members[0]], out[members[1]] = members[1], members[0]
    return out


def mismatch_count(labels, oracle_labels):
    """Number of users whose clustermate differs from the reference partition."""
    return int(np.sum(mates(labels) != mates(oracle_labels)))


def oracle_matching(features, groups, max_clusters=MAX_ORACLE_CLUSTERS):
    """Minimum total-distance good/poor matching by enumerating all ``K!`` matchings.

    Permutations are visited in lexicographic order and only a strictly
    smaller cost wins, so ties go to the lexicographically first matching.
    Returns cluster labels where cluster ``c`` holds the ``c``-th good user.
    """
    good, poor, dist = cross_distances(features, groups)
    k = len(good)
    if k > max_clusters:
        raise ComplexityGuardError(f"K={k} exceeds the exhaustive matching limit {max_clusters}")
    best_cost, best_perm = np.inf, None
    rows = np.arange(k)
    for perm in itertools.permutations(range(k)):
        cost = dist[rows, perm].sum()
        if cost < best_cost:
            best_cost, best_perm = cost, perm
    pairs = [(good[i], poor[best_perm[i]]) for i in range(k)]
    return labels_from_pairs(pairs, len(groups))


def pairing_from_labels(labels, good_users, poor_users):
    """Translate user labels into the beam pairing used by the rate model.

    Returns ``pairing`` with ``pairing[k]`` the row (among ``poor_users``)
    clustered with ``good_users[k]``.
    """
    labels = np.asarray(labels)
    poor_pos = {int(u): j for j, u in enumerate(poor_users)}
    pairing = np.empty(len(good_users), dtype=int)
    for k, g in enumerate(good_users):
        mate = [u for u in np.flatnonzero(labels == labels[g]) if u != g]
        pairing[k] = poor_pos[int(mate[0])]
    return pairing


def _check_groups(X, groups):
    X = check_array(X, dtype=float)
    groups = np.asarray(groups, dtype=int)
    if groups.shape != (X.shape[0],):
        raise ValueError("groups must give one label per user")
    n_good = int(np.sum(groups == GOOD))
    if n_good * 2 != len(groups):
        raise ValueError("equal-size pairing needs as many good as poor users")
    return X, groups


class MomaClusterer(ClusterMixin, BaseEstimator):
    """Modified object-migration automaton for good/poor user pairing.

    Parameters
    ----------
    depth : int
        States per action (``W``).
    max_queries : int
        Query budget.
    temperature : float
        Sharpness of the distance-weighted query stream.
    convergence_window : int
        Converged once this many consecutive queries already fall inside
        existing clusters.
    random_state : int or numpy Generator
    """

    def __init__(self, depth=10, max_queries=2000, temperature=0.2, convergence_window=50,
                 random_state=None):
        self.depth = depth
        self.max_queries = max_queries
        self.temperature = temperature
        self.convergence_window = convergence_window
        self.random_state = random_state

    def fit(self, X, groups, reference_labels=None):
        """Run the automaton on normalised features ``X``.

        If ``reference_labels`` is given, ``mismatch_history_[t]`` records
        the mismatch count after ``t`` queries (index 0 = initial state).
        """
        X, groups = _check_groups(X, groups)
        rng = make_rng(self.random_state)
        state = initial_state(groups, self.depth, rng)
        history = []
        if reference_labels is not None:
            history.append(mismatch_count(state.labels(), reference_labels))

        streak = 0
        n_done = 0
        converged = False
        for query in generate_queries(X, groups, rng, self.max_queries, self.temperature):
            same = state.cluster_of(query.p) == state.cluster_of(query.q)
            state = moma_step(state, query)
            n_done += 1
            streak = streak + 1 if same else 0
            if reference_labels is not None:
                history.append(mismatch_count(state.labels(), reference_labels))
            if streak >= self.convergence_window:
                converged = True
                break

        self.state_ = state
        self.labels_ = state.labels()
        self.n_queries_ = n_done
        self.converged_ = converged
        self.mismatch_history_ = np.asarray(history, dtype=int)
        return self

    def fit_predict(self, X, groups, reference_labels=None):
        return self.fit(X, groups, reference_labels).labels_


def moma_run(features, groups, rng, max_queries=2000, **kwargs):
    """Functional form of :class:`MomaClusterer`; returns the fitted estimator."""
    return MomaClusterer(max_queries=max_queries, random_state=make_rng(rng), **kwargs).fit(
        features, groups
    )


class OracleMatching(ClusterMixin, BaseEstimator):
    def __init__(self, max_clusters=MAX_ORACLE_CLUSTERS):
        self.max_clusters = max_clusters

    def fit(self, X, groups):
        X, groups = _check_groups(X, groups)
        self.labels_ = oracle_matching(X, groups, self.max_clusters)
        self.n_evaluations_ = math.factorial(len(groups) // 2)
        return self

    def fit_predict(self, X, groups):
        return self.fit(X, groups).labels_


class EqualSizeKMeans(ClusterMixin, BaseEstimator):
    """Lloyd's k-means followed by a greedy repair to two users per cluster.

    ``n_iter_`` counts Lloyd iterations and ``n_distance_evals_`` counts
    point-to-centroid distance evaluations, the unit of work used in the
    complexity comparison against the automaton's query count.
    """

    def __init__(self, n_clusters=4, max_iter=100, random_state=None):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        n = X.shape[0]
        k = self.n_clusters
        if n != 2 * k:
            raise ValueError(f"need exactly {2 * k} users for {k} pairs, got {n}")
        rng = make_rng(self.random_state)
        centers = X[rng.choice(n, size=k, replace=False)].copy()
        evals = 0
        labels = np.zeros(n, dtype=int)
        it = 0
        for it in range(1, self.max_iter + 1):
            d = np.linalg.norm(X[:, None, :] - centers[None, :, :], axis=2)
            evals += n * k
            new = np.argmin(d, axis=1)
            for c in range(k):
                if np.any(new == c):
                    centers[c] = X[new == c].mean(axis=0)
            if it > 1 and np.array_equal(new, labels):
                labels = new
                break
            labels = new

        # greedy repair: assign (point, centre) pairs by increasing distance
        d = np.linalg.norm(X[:, None, :] - centers[None, :, :], axis=2)
        evals += n * k
        order = np.argsort(d, axis=None, kind="stable")
        labels = np.full(n, -1, dtype=int)
        room = np.full(k, 2)
        for flat in order:
            i, c = divmod(int(flat), k)
            if labels[i] < 0 and room[c] > 0:
                labels[i] = c
                room[c] -= 1

        self.labels_ = labels
        self.cluster_centers_ = centers
        self.n_iter_ = it
        self.n_distance_evals_ = evals
        return self


def write_mismatch_csv(rows, path):
    """Write ``(seed, iteration, mismatches)`` rows with a header."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "iteration", "mismatches"])
        for row in rows:
            w.writerow(row)
