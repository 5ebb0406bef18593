"""Problem generators: synthetic multigroup libraries and layered spheres.

No nuclear data ships with the package. The benchmark stubs carry the
published geometries and reference eigenvalues as metadata and require the
caller to supply a material file.
"""
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import check_int, check_positive
from .exceptions import DataUnavailableError, InvalidInputError
from .operators import assemble
from .reactor import VOID, LayeredGeometry, Material, MaterialLibrary, build_mesh

#: Hollow core and outer steel thickness used by the optimization problem (cm).
DEFAULT_HOLLOW_LEN = 1.0
DEFAULT_SS3_LEN = 5.0
#: Starting thicknesses of the uranium and inner steel layers (cm).
FOUR_LAYER_ALPHA0 = (1.75, 10.564)


def _infinite_k(removal, chi, nu_sigma_f):
    # row-vector flux: phi @ removal = phi @ outer(nu_sigma_f, chi) / k
    return float(chi @ np.linalg.solve(removal, nu_sigma_f))


def synthetic_material(name, G, rng, fissile=False, k_inf=1.4, chi=None):
    """One material with cross sections that vary smoothly across groups.

    Group 0 is the fastest group. Scattering is mostly downward (weight 0.8
    on and above the diagonal of ``sigma_s[g_from, g_to]``, 0.2 below), and
    row and column sums are capped at ``0.9 * sigma_t``.
    """
    x = np.linspace(0.0, 1.0, G)
    t_lo, t_hi = rng.uniform(0.15, 0.35), rng.uniform(0.6, 1.2)
    sigma_t = t_lo + (t_hi - t_lo) * x ** rng.uniform(0.7, 2.0)
    D = np.clip(rng.uniform(0.8, 1.2) / (3.0 * sigma_t), 0.1, 3.0)
    width = rng.uniform(0.05, 0.2) * G + 0.5
    g = np.arange(G)
    lag = g[None, :] - g[:, None]
    ss = np.where(lag >= 0, 0.8 * np.exp(-lag / width), 0.2 * np.exp(lag / (0.3 * width)))
    ratio = np.minimum(rng.uniform(0.4, 0.85) + 0.1 * x, 0.9)
    ss *= (ratio * sigma_t / ss.sum(axis=1))[:, None]
    col_cap = np.minimum(1.0, 0.9 * sigma_t / ss.sum(axis=0))
    row_cap = np.minimum(1.0, 0.9 * sigma_t / ss.sum(axis=1))
    ss *= np.minimum(row_cap[:, None], col_cap[None, :])
    nu_sigma_f = np.zeros(G)
    if fissile:
        nu_sigma_f = sigma_t * (0.2 + 0.8 * x ** rng.uniform(0.5, 2.0))
        nu_sigma_f *= k_inf / _infinite_k(np.diag(sigma_t) - ss, chi, nu_sigma_f)
    return Material(name, D, sigma_t, ss, nu_sigma_f)


def synthetic_library(G, n_materials=3, seed=0, k_inf=None):
    """Deterministic pseudo-random library; material 0 is the only fissile one.

    Both row and column sums of every scattering matrix stay below
    ``0.9 * sigma_t``, so each removal matrix is strictly diagonally dominant.
    The fuel is scaled to an infinite-medium eigenvalue ``k_inf`` (drawn from
    [1.3, 1.8] when not given).
    """
    G = check_int(G, "G")
    n_materials = check_int(n_materials, "n_materials")
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, G)
    chi = np.exp(-(((x - rng.uniform(0.0, 0.2)) / rng.uniform(0.1, 0.3)) ** 2))
    chi /= chi.sum()
    if k_inf is None:
        k_inf = rng.uniform(1.3, 1.8)
    mats = [synthetic_material("fuel", G, rng, fissile=True, k_inf=k_inf, chi=chi)]
    for i in range(1, n_materials):
        mats.append(synthetic_material(f"mat{i}", G, rng))
    return MaterialLibrary(chi, tuple(mats))


@dataclass(frozen=True)
class Problem:
    library: MaterialLibrary
    geometry: LayeredGeometry
    mesh: object
    ops: object
    seed: int = 0


def synthetic_problem(n_cells, n_groups, seed=0, n_materials=3, scale=1.0, **assemble_kw):
    """A layered sphere (fuel core plus reflector shells) on a synthetic library.

    ``scale`` multiplies the core radius; larger cores have a dominance ratio
    closer to one and hence slower power iteration.
    """
    check_positive(scale, "scale")
    lib = synthetic_library(n_groups, n_materials, seed)
    rng = np.random.default_rng(seed + 10_000)
    thick = [scale * rng.uniform(4.0, 8.0)] + list(rng.uniform(1.0, 4.0, n_materials - 1))
    geom = LayeredGeometry(tuple((i, t) for i, t in enumerate(thick)))
    mesh = build_mesh(geom.outer_radius, n_cells)
    ops = assemble(lib, geom, mesh, **assemble_kw)
    return Problem(lib, geom, mesh, ops, seed)


def four_layer_sphere(alpha1, alpha2, hollow_len=DEFAULT_HOLLOW_LEN,
                      ss3_len=DEFAULT_SS3_LEN, library_roles=(0, 1, 2)):
    """Hollow core, uranium (``alpha1``), steel SS2 (``alpha2``), steel SS3."""
    for name, val in (("alpha1", alpha1), ("alpha2", alpha2),
                      ("hollow_len", hollow_len), ("ss3_len", ss3_len)):
        if not np.isfinite(val) or val < 0:
            raise InvalidInputError(f"{name} must be a finite length >= 0, got {val!r}")
    u, ss2, ss3 = library_roles
    return LayeredGeometry(((VOID, hollow_len), (u, alpha1), (ss2, alpha2), (ss3, ss3_len)))


class Benchmark(enum.Enum):
    PlutoniumSphere = "PlutoniumSphere"
    SteelReflectedUranium = "SteelReflectedUranium"
    LightWaterReactor = "LightWaterReactor"


@dataclass(frozen=True)
class BenchmarkSpec:
    groups: int
    cells: int
    expected_k: float
    description: str


BENCHMARKS = {
    Benchmark.PlutoniumSphere: BenchmarkSpec(
        70, 70, 0.9956975948475687, "bare plutonium sphere, 70 groups"),
    Benchmark.SteelReflectedUranium: BenchmarkSpec(
        87, 400, 0.9269867446024421, "IEU-MET-FAST-005, 87 groups"),
    Benchmark.LightWaterReactor: BenchmarkSpec(
        361, 400, 0.9999061310852358, "homogenized LWR, SHEM-361 groups"),
}

STEEL_URANIUM_RADIUS = 13.213
STEEL_INNER_SHELL = 1.758
STEEL_TOTAL_RADIUS = 21.486
LWR_RADIUS = 79.06925


def benchmark_geometry(name, library, plutonium_radius=None):
    name = Benchmark(name)
    if name is Benchmark.SteelReflectedUranium:
        if len(library) < 3:
            raise DataUnavailableError(
                "SteelReflectedUranium needs three materials (uranium, two steels)")
        outer = STEEL_TOTAL_RADIUS - STEEL_URANIUM_RADIUS - STEEL_INNER_SHELL
        return LayeredGeometry(((0, STEEL_URANIUM_RADIUS), (1, STEEL_INNER_SHELL), (2, outer)))
    if name is Benchmark.LightWaterReactor:
        return LayeredGeometry(((0, LWR_RADIUS),))
    if plutonium_radius is None:
        raise DataUnavailableError(
            "PlutoniumSphere radius is not published with the data; supply it in the file")
    return LayeredGeometry(((0, check_positive(plutonium_radius, "radius")),))


def benchmark_stub(name, data_path):
    """Load a benchmark configuration from an externally supplied material file.

    Returns ``(library, geometry, mesh, expected_k)``. ``expected_k`` is the
    published reference value, meaningful only with the original data.
    """
    from .io import parse_materials  # io depends on this module's types

    try:
        name = Benchmark(name)
    except ValueError as exc:
        raise InvalidInputError(f"unknown benchmark {name!r}") from exc
    spec = BENCHMARKS[name]
    path = Path(data_path)
    if path.is_dir():
        path = path / f"{name.value}.json"
    if not path.exists():
        raise DataUnavailableError(
            f"{spec.description} ({name.value}) requires external nuclear data; "
            f"no material file at {path}"
        )
    library, extra = parse_materials(path, return_extra=True)
    if library.group_count != spec.groups:
        raise DataUnavailableError(
            f"{name.value} needs {spec.groups}-group data, {path} has "
            f"{library.group_count} groups"
        )
    geometry = benchmark_geometry(name, library, extra.get("radius"))
    mesh = build_mesh(geometry.outer_radius, spec.cells)
    return library, geometry, mesh, spec.expected_k
