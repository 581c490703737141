import numpy as np


class GaussianNB:
    """Per-class independent Gaussians with a variance floor.

    The floor is var_smoothing times the largest per-feature variance of the
    training data, which keeps constant features from producing zero variance.
    """

    def __init__(self, var_smoothing=1e-9):
        self.var_smoothing = var_smoothing

    def fit(self, X, y, n_classes):
        X = np.asarray(X, dtype=float)
        self.n_classes = n_classes
        floor = max(self.var_smoothing * X.var(axis=0).max(), np.finfo(float).tiny)
        self.theta_ = np.array([X[y == c].mean(axis=0) for c in range(n_classes)])
        self.var_ = np.array([X[y == c].var(axis=0) for c in range(n_classes)]) + floor
        self.log_prior_ = np.log(np.bincount(y, minlength=n_classes) / y.size)
        return self

    def joint_log_likelihood(self, X):
        X = np.asarray(X, dtype=float)
        out = np.empty((X.shape[0], self.n_classes))
        for c in range(self.n_classes):
            v = self.var_[c]
            out[:, c] = (self.log_prior_[c] - 0.5 * np.log(2 * np.pi * v).sum()
                         - 0.5 * (((X - self.theta_[c]) ** 2) / v).sum(axis=1))
        return out

    def predict(self, X):
        return np.argmax(self.joint_log_likelihood(X), axis=1)

    def to_state(self):
        return {"var_smoothing": self.var_smoothing, "n_classes": self.n_classes,
                "theta": self.theta_.tolist(), "var": self.var_.tolist(),
                "log_prior": self.log_prior_.tolist()}

    @classmethod
    def from_state(cls, s):
        m = cls(s["var_smoothing"])
        m.n_classes = s["n_classes"]
        m.theta_ = np.array(s["theta"], dtype=float)
        m.var_ = np.array(s["var"], dtype=float)
        m.log_prior_ = np.array(s["log_prior"], dtype=float)
        return m
