"""Materials, layered spherical geometry and the radial finite-volume mesh."""
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_matrix, check_positive, check_vector
from .exceptions import InconsistentGeometryError, InvalidInputError, ValidationError

#: Layer tag for an empty (hollow) shell.
VOID = None


@dataclass(frozen=True, eq=False)
class Material:
    """Multigroup macroscopic data of one material.

    ``sigma_s[g_from, g_to]`` is the scattering cross section from group
    ``g_from`` into group ``g_to``. All lengths in cm.
    """

    name: str
    diffusion: np.ndarray
    sigma_t: np.ndarray
    sigma_s: np.ndarray
    nu_sigma_f: np.ndarray

    def __post_init__(self):
        D = check_vector(self.diffusion, f"{self.name}.diffusion")
        G = D.shape[0]
        st = check_vector(self.sigma_t, f"{self.name}.sigma_t", G)
        ss = check_matrix(self.sigma_s, f"{self.name}.sigma_s")
        nsf = check_vector(self.nu_sigma_f, f"{self.name}.nu_sigma_f", G)
        if ss.shape != (G, G):
            raise ValidationError(
                f"{self.name}.sigma_s must be {G}x{G}, got {ss.shape}", "shape"
            )
        if np.any(D <= 0):
            raise ValidationError(f"{self.name}: diffusion must be > 0", "diffusion > 0")
        if np.any(st < 0):
            raise ValidationError(f"{self.name}: sigma_t must be >= 0", "sigma_t >= 0")
        if np.any(ss < 0):
            raise ValidationError(f"{self.name}: sigma_s must be >= 0", "sigma_s >= 0")
        if np.any(nsf < 0):
            raise ValidationError(
                f"{self.name}: nu_sigma_f must be >= 0", "nu_sigma_f >= 0"
            )
        for attr, val in (("diffusion", D), ("sigma_t", st), ("sigma_s", ss),
                          ("nu_sigma_f", nsf)):
            val = val.copy()
            val.flags.writeable = False
            object.__setattr__(self, attr, val)

    @property
    def group_count(self):
        return self.diffusion.shape[0]

    @property
    def removal(self):
        """``diag(sigma_t) - sigma_s``."""
        return np.diag(self.sigma_t) - self.sigma_s

    def __eq__(self, other):
        if not isinstance(other, Material):
            return NotImplemented
        return self.name == other.name and all(
            np.array_equal(getattr(self, a), getattr(other, a))
            for a in ("diffusion", "sigma_t", "sigma_s", "nu_sigma_f")
        )


@dataclass(frozen=True, eq=False)
class MaterialLibrary:
    chi: np.ndarray
    materials: tuple

    def __post_init__(self):
        chi = check_vector(self.chi, "chi")
        mats = tuple(self.materials)
        if not mats:
            raise ValidationError("library has no materials", "materials")
        G = chi.shape[0]
        for mat in mats:
            if not isinstance(mat, Material):
                raise InvalidInputError(f"expected Material, got {type(mat).__name__}")
            if mat.group_count != G:
                raise ValidationError(
                    f"material {mat.name!r} has {mat.group_count} groups, library has {G}",
                    "shared group count",
                )
        if np.any(chi < 0):
            raise ValidationError("chi must be >= 0", "chi >= 0")
        if abs(chi.sum() - 1.0) > 1e-12:
            raise ValidationError(
                f"chi normalization: sum(chi) = {chi.sum():.15g} != 1", "chi normalization"
            )
        chi = chi.copy()
        chi.flags.writeable = False
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "materials", mats)

    @property
    def group_count(self):
        return self.chi.shape[0]

    def __len__(self):
        return len(self.materials)

    def index(self, name):
        for i, mat in enumerate(self.materials):
            if mat.name == name:
                return i
        raise KeyError(name)

    def __eq__(self, other):
        if not isinstance(other, MaterialLibrary):
            return NotImplemented
        return np.array_equal(self.chi, other.chi) and self.materials == other.materials


@dataclass(frozen=True)
class LayeredGeometry:
    """Concentric shells listed from the center outward.

    ``layers`` holds ``(material_index, thickness)`` pairs; a material index
    of ``VOID`` (``None``) marks a hollow shell.
    """

    layers: tuple

    def __post_init__(self):
        layers = []
        for item in self.layers:
            mat, thickness = item
            if mat is not None:
                if isinstance(mat, bool) or not isinstance(mat, (int, np.integer)) or mat < 0:
                    raise InvalidInputError(f"bad material index {mat!r}")
                mat = int(mat)
            thickness = check_positive(float(thickness), "layer thickness", strict=False)
            layers.append((mat, thickness))
        if not any(m is not None for m, _ in layers):
            raise InvalidInputError("geometry needs at least one non-void layer")
        object.__setattr__(self, "layers", tuple(layers))
        if self.outer_radius <= 0:
            raise InvalidInputError("geometry outer radius must be > 0")

    @property
    def outer_radius(self):
        return float(sum(t for _, t in self.layers))

    def bounds(self):
        """``(material, inner, outer)`` per layer."""
        out, inner = [], 0.0
        for mat, t in self.layers:
            out.append((mat, inner, inner + t))
            inner += t
        return out


@dataclass(frozen=True, eq=False)
class SphericalMesh:
    radius: float
    cell_count: int
    dr: float
    centers: np.ndarray
    faces: np.ndarray
    volumes: np.ndarray
    surfaces: np.ndarray


def build_mesh(R, N_x):
    """Uniform radial mesh of a sphere of radius ``R`` with ``N_x`` cells.

    ``surfaces`` holds the ``N_x + 1`` interface areas, the first being the
    (zero) area at the center.
    """
    R = check_positive(R, "R")
    N_x = check_int(N_x, "N_x")
    dr = R / N_x
    faces = dr * np.arange(N_x + 1, dtype=float)
    faces[-1] = R
    centers = (np.arange(1, N_x + 1) - 0.5) * dr
    volumes = 4.0 * np.pi / 3.0 * (faces[1:] ** 3 - faces[:-1] ** 3)
    surfaces = 4.0 * np.pi * faces**2
    for arr in (faces, centers, volumes, surfaces):
        arr.flags.writeable = False
    return SphericalMesh(R, N_x, dr, centers, faces, volumes, surfaces)


def density_fields(geometry, mesh, n_materials=None, rule="center"):
    """Per-material cell densities, shape ``(n_materials, N_x)``.

    ``rule="center"`` assigns each cell wholly to the layer containing its
    center (half-open ``[inner, outer)``); ``rule="volume"`` uses the exact
    volume fraction of each cell occupied by each layer, which makes the
    densities continuous in the layer thicknesses. Void layers contribute to
    no material, so the column sums are 1 in material cells and below 1 where
    the sphere is hollow.
    """
    R = mesh.radius
    if abs(geometry.outer_radius - R) > 1e-12 * R:
        raise InconsistentGeometryError(
            f"geometry radius {geometry.outer_radius!r} does not match mesh radius {R!r}"
        )
    used = [m for m, _ in geometry.layers if m is not None]
    if n_materials is None:
        n_materials = max(used) + 1
    elif used and max(used) >= n_materials:
        raise InvalidInputError(
            f"geometry references material {max(used)} but only {n_materials} exist"
        )
    rho = np.zeros((n_materials, mesh.cell_count))
    bounds = geometry.bounds()
    if rule == "center":
        r = mesh.centers
        for mat, inner, outer in bounds:
            if mat is None or outer <= inner:
                continue
            inside = (r >= inner) & (r < outer)
            rho[mat, inside] = 1.0
    elif rule == "volume":
        lo_f, hi_f = mesh.faces[:-1], mesh.faces[1:]
        for mat, inner, outer in bounds:
            if mat is None or outer <= inner:
                continue
            lo = np.clip(np.maximum(lo_f, inner), None, hi_f)
            hi = np.clip(np.minimum(hi_f, outer), lo, None)
            rho[mat] += (hi**3 - lo**3) / (hi_f**3 - lo_f**3)
        np.clip(rho, 0.0, 1.0, out=rho)
    else:
        raise InvalidInputError(f"unknown density rule {rule!r}")
    return rho
