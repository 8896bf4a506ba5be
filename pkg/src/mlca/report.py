"""Fit serialization and the plain-text summary.

The summary is rendered from the JSON document only, so a stored document
re-renders to exactly the text printed at fit time. Matrices are stored
row-major as ``{"dims": [...], "data": [...]}``.
"""

from __future__ import annotations

import json

import numpy as np

from .estimators import STARS, FitResult, stars

SCHEMA_VERSION = 1
RULE = "---------------------------"


def _mat(a):
    a = np.asarray(a, dtype=float)
    return {"dims": list(a.shape), "data": a.ravel().tolist()}


def unmat(m):
    return np.asarray(m["data"], dtype=float).reshape(m["dims"])


def specification(fit: FitResult) -> str:
    low = fit.structural.K > 1
    high = fit.structural.K_high > 1
    if fit.M == 1:
        return "Single-level LC model" + (" with covariates" if low else "")
    text = "Multilevel LC model"
    if low and high:
        text += " with lower- and higher-level covariates"
    elif low:
        text += " with lower-level covariates"
    elif high:
        text += " with higher-level covariates"
    return text


def headline_trace(fit: FitResult):
    """The EM run whose iterations describe the fit.

    Models with covariates report the final (structural or one-step) run;
    measurement-only two-step/two-stage fits report the measurement run,
    since their structural step only re-expresses it.
    """
    if fit.spec.estimator == "one_step" or fit.structural.K > 1 or fit.structural.K_high > 1:
        return fit.trace
    for key in ("1c", "1b", "1a", "step1"):
        if key in fit.stages:
            return fit.stages[key]
    return fit.trace


def fit_to_dict(fit: FitResult, call="", extended=False) -> dict:
    d = fit.data
    head = headline_trace(fit)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "call": call,
        "model": {
            "T": fit.T,
            "M": fit.M,
            "estimator": fit.spec.estimator,
            "specification": specification(fit),
            "low_covariates": list(d.z_names[1:]),
            "high_covariates": list(d.zh_names[1:]),
        },
        "data": {
            "N": d.N,
            "J": d.J,
            "items": [{"name": it.name, "categories": [str(c) for c in it.categories]} for it in d.items],
            "group_labels": None if d.group_labels is None else [str(g) for g in d.group_labels],
        },
        "estimation": {
            "iterations": head.iterations,
            "ll_first": head.ll_first,
            "ll_last": head.ll_last,
            "converged": head.converged,
            "stages": {k: v.to_dict() for k, v in fit.stages.items()},
        },
        "group_proportions": _mat(fit.omega_avg),
        "class_proportions": _mat(fit.class_avg),
        "class_proportions_given_group": _mat(fit.pi_avg),
        "response_probabilities": [_mat(p) for p in fit.phi.phi],
        "statistics": {**fit.ic.to_dict(), **fit.class_stats.to_dict()},
        "structural": {"gamma": _mat(fit.structural.gamma), "alpha": _mat(fit.structural.alpha)},
        "inference": None,
    }
    inf = fit.inference
    if inf is not None:
        doc["inference"] = {
            "names": list(inf.names),
            "estimate": inf.estimate.tolist(),
            "se": inf.se.tolist(),
            "z": inf.z.tolist(),
            "p": inf.p.tolist(),
        }
    if extended:
        post = fit.posteriors
        doc["extended"] = {
            "rows": d.rows.tolist(),
            "group": d.group.tolist(),
            "posterior_low": _mat(post.px),
            "posterior_high": _mat(post.pw),
            "vcov": None if inf is None else _mat(inf.vcov),
        }
    # normalise through JSON so rendering now and after reloading agree exactly
    return json.loads(json.dumps(doc))


def dumps(doc) -> str:
    return json.dumps(doc, indent=1) + "\n"


def load(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    return doc


# --- rendering --------------------------------------------------------------


def _num(x, digits=4):
    return "NaN" if x is None or not np.isfinite(x) else f"{x:.{digits}f}"


def _table(rows, header=None):
    """Left-aligned first column, right-aligned numeric columns."""
    width0 = max(len(r[0]) for r in rows + ([header] if header else []))
    ncol = len(rows[0]) - 1
    widths = [max(len(r[k + 1]) for r in rows + ([header] if header else [])) for k in range(ncol)]
    lines = []
    if header:
        lines.append(" " * width0 + "".join(" " + h.rjust(w) for h, w in zip(header[1:], widths)))
    for r in rows:
        lines.append(r[0].ljust(width0) + "".join(" " + c.rjust(w) for c, w in zip(r[1:], widths)))
    return lines


def _response_rows(doc):
    T = doc["model"]["T"]
    rows = []
    for item, m in zip(doc["data"]["items"], doc["response_probabilities"]):
        p = unmat(m)
        if len(item["categories"]) == 2:
            rows.append([f"P({item['name']}|C)"] + [_num(p[t, 1]) for t in range(T)])
        else:
            for c, cat in enumerate(item["categories"]):
                rows.append([f"P({item['name']}={cat}|C)"] + [_num(p[t, c]) for t in range(T)])
    return rows


def _stats_rows(doc):
    s = doc["statistics"]
    if doc["model"]["M"] == 1:
        pairs = [("ClassErr", s["class_err_low"]), ("EntR-sqr", s["entropy_r2_low"]), ("BIC", s["bic_low"]), ("AIC", s["aic"])]
    else:
        pairs = [
            ("R2entrlow", s["entropy_r2_low"]),
            ("R2entrhigh", s["entropy_r2_high"]),
            ("BIClow", s["bic_low"]),
            ("BIChigh", s["bic_high"]),
            ("ICLBIClow", s["icl_bic_low"]),
            ("ICLBIChigh", s["icl_bic_high"]),
            ("AIC", s["aic"]),
        ]
    return [[k, _num(v)] for k, v in pairs]


def _legend():
    return " " + ", ".join(f"{mark} p < {cut}" for cut, mark in STARS)


def _coef_block(title, coef_label, idx, inf):
    rows = []
    for i in idx:
        p = inf["p"][i]
        pstr = _num(p) + (stars(p) if p is not None and np.isfinite(p) else "")
        rows.append([inf["names"][i], _num(inf["estimate"][i]), _num(inf["se"][i]), _num(inf["z"][i]), pstr.ljust(len(_num(0.0)) + 3)])
    header = ["", coef_label, "S.E.", "Z-score", "p-value".ljust(len(_num(0.0)) + 3)]
    return [title, ""] + _table(rows, header) + ["", "", _legend(), ""]


def _logistic_sections(doc):
    inf = doc["inference"]
    if inf is None:
        return []
    T, M = doc["model"]["T"], doc["model"]["M"]
    K = 1 + len(doc["model"]["low_covariates"])
    Kh = 1 + len(doc["model"]["high_covariates"])
    n_gamma = M * (T - 1) * K
    out = []
    if M > 1 and Kh > 1:
        out += [RULE, "", "LOGISTIC MODEL FOR HIGHER-LEVEL CLASS MEMBERSHIP:", "", ""]
        for m in range(1, M):
            idx = [n_gamma + (m - 1) * Kh + k for k in range(Kh)]
            out += _coef_block(f"MODEL FOR G{m + 1} (BASE G1)", "Alpha", idx, inf)
    if T > 1 and K > 1:
        out += [RULE, "", "LOGISTIC MODEL FOR LOWER-LEVEL CLASS MEMBERSHIP:", "", ""]
        for m in range(M):
            for t in range(1, T):
                start = (m * (T - 1) + (t - 1)) * K
                given = f" GIVEN G{m + 1}" if M > 1 else ""
                out += _coef_block(f"MODEL FOR C{t + 1} (BASE C1){given}", "Gamma", range(start, start + K), inf)
    return out


def render_summary(doc) -> str:
    """Plain-text summary of a fit document (pure function of ``doc``)."""
    T, M = doc["model"]["T"], doc["model"]["M"]
    est = doc["estimation"]
    lines = ["", "CALL:", doc.get("call") or "(library call)", "", "SPECIFICATION:", "", " " + doc["model"]["specification"], ""]
    lines += ["ESTIMATION DETAILS:", ""]
    lines += _table(
        [["", str(est["iterations"]), _num(est["ll_first"]), _num(est["ll_last"])]],
        ["", "EMiter", "LLfirst", "LLlast"],
    )
    if not est["converged"]:
        lines.append(" (maximum number of iterations reached)")
    lines += ["", RULE, ""]
    if M > 1:
        omega = unmat(doc["group_proportions"])
        lines += ["GROUP PROPORTIONS (SAMPLE MEAN):", ""]
        lines += _table([[f"P(G{m + 1})", _num(omega[m])] for m in range(M)])
        lines += ["", "CLASS PROPORTIONS (SAMPLE MEAN):", ""]
        pi = unmat(doc["class_proportions_given_group"])
        lines += _table(
            [[f"P(C{t + 1}|G)"] + [_num(pi[m, t]) for m in range(M)] for t in range(T)],
            [""] + [f"G{m + 1}" for m in range(M)],
        )
    else:
        heading = "CLASS PROPORTIONS (SAMPLE MEAN):" if doc["model"]["low_covariates"] else "CLASS PROPORTIONS:"
        cls = unmat(doc["class_proportions"])
        lines += [heading, ""]
        lines += _table([[f"P(C{t + 1})", _num(cls[t])] for t in range(T)])
    lines += ["", "RESPONSE PROBABILITIES:", ""]
    lines += _table(_response_rows(doc), [""] + [f"C{t + 1}" for t in range(T)])
    lines += ["", RULE, "", "MODEL AND CLASSIFICATION STATISTICS:", ""]
    lines += _table(_stats_rows(doc))
    lines += [""]
    sections = _logistic_sections(doc)
    if sections:
        lines += [""] + sections
    return "\n".join(lines) + "\n"


def render_selection_table(table) -> str:
    cols = ["T", "M", "ll", "npar", "bic_low", "bic_high", "aic", "icl_bic_low", "icl_bic_high"]
    has_step = any("step" in r for r in table)
    header = (["step"] if has_step else []) + cols
    rows = []
    for r in table:
        cells = [str(r["step"])] if has_step else []
        for c in cols:
            v = r[c]
            cells.append(_num(v) if isinstance(v, float) else str(v))
        rows.append(cells)
    widths = [max(len(h), *(len(row[k]) for row in rows)) for k, h in enumerate(header)]
    lines = [" ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines += [" ".join(c.rjust(w) for c, w in zip(row, widths)) for row in rows]
    return "\n".join(lines) + "\n"
