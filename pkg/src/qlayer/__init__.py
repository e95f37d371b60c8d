"""qlayer: certified bound-state detection for quantum layers.

A quantum layer is the tubular region of half-width a around a hypersurface
Sigma in R^{n+1}, carrying the Dirichlet Laplacian. The package decides,
with explicit error control, whether the layer binds a state below the
threshold kappa1^2 = (pi / 2a)^2 of its essential spectrum, by two
independent routes: exact variational test functions evaluated through
quadrature of the layer's quadratic form, and a discretized layer operator
whose lowest eigenvalue is compared against the threshold.

Submodules are imported lazily so that the command-line entry point can
configure threading environment variables before numpy loads.
"""

__version__ = "0.1.0"

_EXPORTS = {
    "QLayerError": "errors",
    "Interval": "geometry", "SurfaceChart": "geometry",
    "FundamentalForms": "geometry", "ShapeData": "geometry",
    "CurvatureData": "geometry", "GraphFunction": "geometry",
    "fundamental_forms": "geometry", "shape_data": "geometry",
    "curvature_data": "geometry", "mean_curvature_graph": "geometry",
    "graph_chart": "geometry",
    "LayerConfig": "layer", "LayerMetric": "layer",
    "ValidityReport": "layer", "layer_metric": "layer",
    "measure_bounds_check": "layer", "validity_scan": "layer",
    "list_catalog": "catalog", "build_chart": "catalog",
    "get_entry": "catalog",
    "make_profile": "forms", "mu_coefficients": "forms",
    "evaluate_Q": "forms", "convex_certificate": "forms",
    "TensorMesh": "eigensolver", "assemble": "eigensolver",
    "solve_lowest": "eigensolver", "essential_threshold": "eigensolver",
    "bound_state_certificate": "eigensolver",
}

__all__ = ["__version__", *sorted(_EXPORTS)]


def __getattr__(name):
    if name in _EXPORTS:
        from importlib import import_module
        module = import_module(f".{_EXPORTS[name]}", __name__)
        value = getattr(module, name)
        globals()[name] = value
        return value
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(_EXPORTS))
