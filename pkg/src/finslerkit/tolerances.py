"""Central tolerance ledger.

Every verdict in the package is thresholded by one of these values. The CLI
accepts per-run overrides and echoes the resolved table into its output.
"""

DEFAULTS = {
    # geometry-core validity checks
    "homogeneity": 1e-10,
    "euler": 1e-10,
    "grad_fd": 1e-6,
    "hess_fd": 1e-4,
    # planar norms / sections
    "tau_eq": 1e-4,
    "tau_tau": 1e-8,
    "ellipse_kkt": 1e-8,
    "ellipse_active": 1e-9,
    # surfaces
    "sff_scale": 1e-7,
    "metric_fd": 1e-5,
    "immersion_rank": 1e-10,
}


def resolve(overrides=None):
    """Return the default table updated with ``overrides``.

    Unknown keys raise ``KeyError`` so that typos never silently fall back
    to a default.
    """
    table = dict(DEFAULTS)
    for key, value in (overrides or {}).items():
        if key not in table:
            raise KeyError(key)
        table[key] = float(value)
    return table
