"""Linear classifiers on standardized features.

Both models standardize each feature with training-set mean and standard
deviation (constant features are left at zero) and keep those statistics, so
fitted weights are in standardized units.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy import optimize


class Standardizer:
    def fit(self, X):
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale_ = np.where(sd > 0, sd, 1.0)
        return self

    def transform(self, X):
        return (X - self.mean_) / self.scale_

    def to_state(self):
        return {"mean": self.mean_.tolist(), "scale": self.scale_.tolist()}

    @classmethod
    def from_state(cls, s):
        st = cls()
        st.mean_ = np.array(s["mean"], dtype=float)
        st.scale_ = np.array(s["scale"], dtype=float)
        return st


def decide(scores):
    """Class index from a score matrix; equal scores go to the lower class."""
    scores = np.asarray(scores)
    if scores.shape[1] == 1:
        return (scores[:, 0] > 0).astype(int)
    return np.argmax(scores, axis=1)


# ---------------------------------------------------------------- hinge loss

def hinge_primal(W, Z, Ys, C):
    """Per-column primal objective 0.5*||w||^2 + C * sum(max(0, 1 - y * z.w))."""
    margins = Ys * (Z @ W)
    return 0.5 * (W * W).sum(axis=0) + C * np.maximum(0.0, 1.0 - margins).sum(axis=0)


@njit(cache=True)
def _primal(w, Z, y, C):
    n, D = Z.shape
    obj = 0.0
    for j in range(D):
        obj += w[j] * w[j]
    obj *= 0.5
    for i in range(n):
        s = 0.0
        for j in range(D):
            s += Z[i, j] * w[j]
        r = 1.0 - y[i] * s
        if r > 0.0:
            obj += C * r
    return obj


@njit(cache=True)
def _segment_search(m, g, ww, wd, dd, C):
    """Exact minimizer over t in [0, 1] of

        0.5*ww + t*wd + 0.5*t^2*dd + C * sum(max(0, m_i - t*g_i))

    i.e. the primal along a segment, where m_i is sample i's margin slack at
    the start and g_i its rate of change. The function is convex and
    piecewise quadratic with breakpoints m_i / g_i. A sweep over the sorted
    breakpoints keeps the active-set sums current and minimizes each piece in
    closed form.
    """
    if dd == 0.0:
        return 0.0
    n = m.shape[0]
    bp = np.empty(n)
    who = np.empty(n, dtype=np.int64)
    nb = 0
    M = 0.0
    G = 0.0
    for i in range(n):
        b = m[i] / g[i] if g[i] != 0.0 else -1.0
        if 0.0 < b < 1.0:
            bp[nb] = b
            who[nb] = i
            nb += 1
            crossing_active = g[i] > 0.0
        else:
            # status is constant on (0, 1); probe at t = 0.5
            crossing_active = m[i] - 0.5 * g[i] > 0.0
        if crossing_active:
            M += m[i]
            G += g[i]
    order = np.argsort(bp[:nb])
    best_t, best_phi = 0.0, np.inf
    lo = 0.0
    k = 0
    while True:
        hi = bp[order[k]] if k < nb else 1.0
        t = -(wd - C * G) / dd
        t = min(max(t, lo), hi)
        phi = 0.5 * ww + t * wd + 0.5 * t * t * dd + C * (M - t * G)
        if phi < best_phi:
            best_phi, best_t = phi, t
        if k >= nb:
            break
        while k < nb and bp[order[k]] == hi:
            i = who[order[k]]
            if g[i] > 0.0:
                M -= m[i]
                G -= g[i]
            else:
                M += m[i]
                G += g[i]
            k += 1
        lo = hi
    return best_t


@njit(cache=True)
def _run_epochs(Z, Ys, alpha, Wt, Wp, P, qd, perms, C, tol, trace, shrunk, pg_old):
    """Run one epoch per row of `perms`; returns (epochs run, converged).

    Wt holds the dual-implied weights and Wp the primal iterate, both (K, D).
    trace[e] receives the primal objectives after epoch e. Dual variables
    stuck at a bound with a gradient pushing outward are shrunk (skipped)
    until the remaining problem looks solved; then all are restored.
    """
    n, D = Z.shape
    K = Ys.shape[1]
    pg_new = np.empty((K, 2))
    for e in range(perms.shape[0]):
        for c in range(K):
            pg_new[c, 0] = -np.inf
            pg_new[c, 1] = np.inf
        for i in perms[e]:
            if qd[i] == 0.0:
                continue
            for c in range(K):
                if shrunk[i, c]:
                    continue
                s = 0.0
                for j in range(D):
                    s += Z[i, j] * Wt[c, j]
                grad = Ys[i, c] * s - 1.0
                a = alpha[i, c]
                pg = grad
                if a == 0.0:
                    if grad > pg_old[c, 0]:
                        shrunk[i, c] = True
                        continue
                    if grad > 0.0:
                        pg = 0.0
                elif a == C:
                    if grad < pg_old[c, 1]:
                        shrunk[i, c] = True
                        continue
                    if grad < 0.0:
                        pg = 0.0
                pg_new[c, 0] = max(pg_new[c, 0], pg)
                pg_new[c, 1] = min(pg_new[c, 1], pg)
                if pg == 0.0:
                    continue
                new = a - grad / qd[i]
                if new < 0.0:
                    new = 0.0
                elif new > C:
                    new = C
                step = (new - a) * Ys[i, c]
                if step != 0.0:
                    for j in range(D):
                        Wt[c, j] += step * Z[i, j]
                    alpha[i, c] = new

        Dir = Wt - Wp
        ZWp = np.dot(Z, Wp.T)
        ZDir = np.dot(Z, Dir.T)
        done = True
        for c in range(K):
            ww = np.dot(Wp[c], Wp[c])
            wd = np.dot(Wp[c], Dir[c])
            dd = np.dot(Dir[c], Dir[c])
            slack = 1.0 - Ys[:, c] * ZWp[:, c]
            rate = Ys[:, c] * ZDir[:, c]
            t = _segment_search(slack, rate, ww, wd, dd, C)
            if t > 0.0:
                val = 0.5 * (ww + 2.0 * t * wd + t * t * dd)
                for i in range(n):
                    r = slack[i] - t * rate[i]
                    if r > 0.0:
                        val += C * r
                if val <= P[c]:
                    Wp[c] += t * Dir[c]
                    P[c] = val
            trace[e, c] = P[c]

            dual = 0.0
            for i in range(n):
                dual += alpha[i, c]
            dual -= 0.5 * np.dot(Wt[c], Wt[c])
            if P[c] - dual > tol * max(P[c], 1e-300):
                done = False
                if pg_new[c, 0] - pg_new[c, 1] <= tol:
                    # the reduced problem is solved but the full one is not
                    shrunk[:, c] = False
                    pg_old[c, 0] = np.inf
                    pg_old[c, 1] = -np.inf
                    continue
            pg_old[c, 0] = pg_new[c, 0] if pg_new[c, 0] > 0.0 else np.inf
            pg_old[c, 1] = pg_new[c, 1] if pg_new[c, 1] < 0.0 else -np.inf
        if done:
            return e + 1, True
    return perms.shape[0], False


def fit_hinge(Z, Ys, C=1.0, max_iters=1000, tol=1e-4, rng=None, chunk=64):
    """L2-regularized hinge loss, one column of Ys (+1/-1) per binary problem.

    Dual coordinate descent (samples visited in a fresh seeded permutation
    each epoch) drives the dual variables; after every epoch the primal
    iterate moves to the best point on the segment towards the weights implied
    by the current dual, so the primal objective never increases. Stops when
    the relative duality gap of every problem is <= tol.

    Returns (W, trace, converged) with W of shape (D, K); trace[e] is the
    per-problem primal objective after epoch e (trace[0] is W = 0).
    """
    Z = np.ascontiguousarray(Z, dtype=float)
    Ys = np.ascontiguousarray(Ys, dtype=float)
    n, D = Z.shape
    K = Ys.shape[1]
    rng = rng if rng is not None else np.random.default_rng(0)
    alpha = np.zeros((n, K))
    Wt = np.zeros((K, D))
    Wp = np.zeros((K, D))
    qd = (Z * Z).sum(axis=1)
    P = np.full(K, C * n, dtype=float)
    traces = [P.copy()[None, :]]
    shrunk = np.zeros((n, K), dtype=np.bool_)
    pg_old = np.empty((K, 2))
    pg_old[:, 0] = np.inf
    pg_old[:, 1] = -np.inf
    converged = False
    left = max_iters
    while left > 0 and not converged:
        m = min(chunk, left)
        perms = rng.permuted(np.tile(np.arange(n), (m, 1)), axis=1)
        trace = np.empty((m, K))
        ran, converged = _run_epochs(Z, Ys, alpha, Wt, Wp, P, qd, perms, float(C), float(tol), trace,
                                     shrunk, pg_old)
        traces.append(trace[:ran])
        left -= ran
    return Wp.T.copy(), np.vstack(traces), bool(converged)


class LinearSVC:
    """Linear SVM, one-vs-rest for more than two classes.

    The intercept is fitted as the weight of a constant unit feature and is
    therefore regularized along with the other weights.
    """

    def __init__(self, C=1.0, max_iters=1000, tol=1e-4, seed=0):
        self.C = C
        self.max_iters = max_iters
        self.tol = tol
        self.seed = seed

    def fit(self, X, y, n_classes):
        self.n_classes = n_classes
        self.scaler_ = Standardizer().fit(X)
        Z = self.scaler_.transform(X)
        Z = np.hstack([Z, np.ones((Z.shape[0], 1))])
        if n_classes == 2:
            Ys = np.where(y == 1, 1.0, -1.0)[:, None]
        else:
            Ys = np.where(y[:, None] == np.arange(n_classes)[None, :], 1.0, -1.0)
        rng = np.random.default_rng(self.seed)
        W, self.trace_, self.converged_ = fit_hinge(Z, Ys, self.C, self.max_iters, self.tol, rng)
        self.coef_ = W[:-1].T.copy()
        self.intercept_ = W[-1].copy()
        return self

    def decision_function(self, X):
        return self.scaler_.transform(np.asarray(X, dtype=float)) @ self.coef_.T + self.intercept_

    def predict(self, X):
        return decide(self.decision_function(X))

    def weights(self):
        return self.coef_

    def to_state(self):
        return {
            "C": self.C, "max_iters": self.max_iters, "tol": self.tol, "seed": self.seed,
            "n_classes": self.n_classes, "converged": self.converged_,
            "scaler": self.scaler_.to_state(),
            "coef": self.coef_.tolist(), "intercept": self.intercept_.tolist(),
        }

    @classmethod
    def from_state(cls, s):
        m = cls(s["C"], s["max_iters"], s["tol"], s["seed"])
        m.n_classes, m.converged_ = s["n_classes"], s["converged"]
        m.scaler_ = Standardizer.from_state(s["scaler"])
        m.coef_ = np.array(s["coef"], dtype=float)
        m.intercept_ = np.array(s["intercept"], dtype=float)
        m.trace_ = None
        return m


# ---------------------------------------------------------------- logistic

def logistic_objective(theta, Z, Y, l2):
    """Mean multinomial cross-entropy plus (l2 / 2n) * ||W||^2 and its gradient.

    theta packs W (K x d, row-major) followed by the K intercepts; intercepts
    are not penalized. Y is the one-hot label matrix.
    """
    n, d = Z.shape
    K = Y.shape[1]
    W = theta[: K * d].reshape(K, d)
    b = theta[K * d:]
    logits = Z @ W.T + b
    logits -= logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(logits).sum(axis=1, keepdims=True))
    logp = logits - logsum
    f = -(Y * logp).sum() / n + 0.5 * l2 / n * (W * W).sum()
    R = (np.exp(logp) - Y) / n
    gW = R.T @ Z + (l2 / n) * W
    gb = R.sum(axis=0)
    return f, np.concatenate([gW.ravel(), gb])


class LogisticRegression:
    """Multinomial L2-regularized logistic regression, fitted with L-BFGS."""

    def __init__(self, l2_strength=1.0, max_iters=1000, tol=1e-4):
        self.l2_strength = l2_strength
        self.max_iters = max_iters
        self.tol = tol

    def fit(self, X, y, n_classes):
        self.n_classes = n_classes
        self.scaler_ = Standardizer().fit(X)
        Z = self.scaler_.transform(X)
        n, d = Z.shape
        Y = np.eye(n_classes)[y]
        theta0 = np.zeros(n_classes * (d + 1))
        res = optimize.minimize(
            logistic_objective, theta0, args=(Z, Y, self.l2_strength), jac=True,
            method="L-BFGS-B",
            options={"maxiter": self.max_iters, "gtol": self.tol / np.sqrt(theta0.size),
                     "ftol": 1e-15, "maxcor": 20},
        )
        theta = res.x
        self.grad_norm_ = float(np.linalg.norm(res.jac))
        self.converged_ = self.grad_norm_ <= self.tol
        self.W_ = theta[: n_classes * d].reshape(n_classes, d)
        self.b_ = theta[n_classes * d:]
        return self

    def decision_function(self, X):
        return self.scaler_.transform(np.asarray(X, dtype=float)) @ self.W_.T + self.b_

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def weights(self):
        if self.n_classes == 2:
            return (self.W_[1] - self.W_[0])[None, :]
        return self.W_

    def to_state(self):
        return {
            "l2_strength": self.l2_strength, "max_iters": self.max_iters, "tol": self.tol,
            "n_classes": self.n_classes, "converged": self.converged_, "grad_norm": self.grad_norm_,
            "scaler": self.scaler_.to_state(), "W": self.W_.tolist(), "b": self.b_.tolist(),
        }

    @classmethod
    def from_state(cls, s):
        m = cls(s["l2_strength"], s["max_iters"], s["tol"])
        m.n_classes, m.converged_, m.grad_norm_ = s["n_classes"], s["converged"], s["grad_norm"]
        m.scaler_ = Standardizer.from_state(s["scaler"])
        m.W_ = np.array(s["W"], dtype=float)
        m.b_ = np.array(s["b"], dtype=float)
        return m
