"""Factored operator families of the discretized multigroup eigenproblem.

The flux is an ``N_x x G`` matrix ``phi`` (rows: radial cells, columns:
energy groups). The eigenproblem reads ``L(phi) = F(phi) / k`` with

    L(phi) = - sum_{l,k} D[l,k] @ phi @ M[l,k]  +  sum_l rho[l] @ phi @ Sigma[l]
    F(phi) =   sum_l rho[l] @ phi @ Sigma_f[l].T

``Sigma[l] = diag(sigma_t) - sigma_s`` and ``Sigma_f[l] = outer(chi, nu_sigma_f)``.
Scattering is stored ``sigma_s[g_from, g_to]`` so it acts from the right as
is; the fission matrix is stored ``[g_to, g_from]`` and therefore acts from
the right through its transpose.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError, ResourceLimitError
from .kernels import sylvester_matrix
from .reactor import Material, density_fields

#: Default cap on ``N_x * G`` for dense Kronecker assembly.
DENSE_CAP = 25_000

VOID_NAME = "void"


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """Assembled factors.

    Attributes
    ----------
    spatial_diffusion : dict[(int, int), ndarray]
        Tridiagonal ``N_x x N_x`` stencils, only for material pairs that meet
        across some cell face (or at the outer boundary).
    energy_diffusion : dict[(int, int), ndarray]
        Diagonal ``G x G`` matrices ``D_l D_k / (D_l + D_k)``.
    density : dict[int, ndarray]
        Diagonal ``N_x x N_x`` density matrices.
    removal, fission : dict[int, ndarray]
        ``G x G`` removal and fission matrices (fission as ``outer(chi, nu_sigma_f)``).
    material_names : tuple of str
        Includes the void pseudo-material when the geometry is hollow.
    """

    spatial_diffusion: dict
    energy_diffusion: dict
    density: dict
    removal: dict
    fission: dict
    material_names: tuple
    dims: tuple

    @property
    def n_cells(self):
        return self.dims[0]

    @property
    def n_groups(self):
        return self.dims[1]

    @property
    def pairs(self):
        return tuple(self.spatial_diffusion)

    @property
    def materials(self):
        return tuple(self.density)

    def fission_right(self, l):
        """The fission matrix in the orientation that multiplies ``phi`` from the right."""
        return self.fission[l].T

    def left_pairs(self):
        """``(left, right)`` factors of the loss operator ``L``."""
        out = [(-self.spatial_diffusion[p], self.energy_diffusion[p]) for p in self.pairs]
        out += [(self.density[l], self.removal[l]) for l in self.materials]
        return out

    def fission_pairs(self):
        return [(self.density[l], self.fission_right(l)) for l in self.materials]

    def apply_left(self, phi):
        out = np.zeros_like(phi, dtype=float)
        for a, b in self.left_pairs():
            out += a @ phi @ b
        return out

    def apply_fission(self, phi):
        out = np.zeros_like(phi, dtype=float)
        for a, b in self.fission_pairs():
            out += a @ phi @ b
        return out


def _pseudo_void(G, diffusion, sigma_t):
    return Material(
        VOID_NAME,
        np.full(G, diffusion),
        np.full(G, sigma_t),
        np.zeros((G, G)),
        np.zeros(G),
    )


def _face_weights(rho_l, rho_k):
    """``rho_l * rho_k * (rho_l + rho_k)`` for the two cells sharing a face."""
    return rho_l * rho_k * (rho_l + rho_k)


def assemble(library, geometry, mesh, density_rule="center", boundary="face",
             void_diffusion=1e3, void_sigma_t=1e-8):
    """Build the :class:`OperatorSet` of a layered sphere.

    Parameters
    ----------
    density_rule : {"center", "volume"}
        How cells are assigned to layers, see :func:`~dlrcrit.reactor.density_fields`.
    boundary : {"face", "ghost"}
        Zero-flux condition at the outer surface. ``"face"`` puts the zero at
        ``r = R`` (half-cell distance from the last center); ``"ghost"`` puts
        it at the center of a ghost cell one ``dr`` outside.
    void_diffusion, void_sigma_t : float
        Data of the weak absorber substituted in hollow cells.
    """
    if boundary not in ("face", "ghost"):
        raise InvalidInputError(f"unknown boundary condition {boundary!r}")
    G = library.group_count
    N = mesh.cell_count
    rho = density_fields(geometry, mesh, n_materials=len(library), rule=density_rule)
    if rho.shape != (len(library), N):
        raise InvalidInputError("density fields do not match library and mesh")
    materials = list(library.materials)
    hollow = 1.0 - rho.sum(axis=0)
    if np.any(hollow > 1e-12):
        materials.append(_pseudo_void(G, void_diffusion, void_sigma_t))
        rho = np.vstack([rho, np.clip(hollow, 0.0, 1.0)])

    present = [l for l in range(len(materials)) if np.any(rho[l] > 0)]
    coef = 1.0 / (mesh.dr * mesh.volumes)
    S = mesh.surfaces
    bc = 2.0 if boundary == "face" else 1.0

    spatial, energy = {}, {}
    for l in present:
        for k in present:
            right = np.zeros(N)
            left = np.zeros(N)
            right[:-1] = _face_weights(rho[l, :-1], rho[k, 1:]) * S[1:-1] * coef[:-1]
            left[1:] = _face_weights(rho[l, 1:], rho[k, :-1]) * S[1:-1] * coef[1:]
            # outer surface: the ghost cell carries the last cell's material
            boundary_w = bc * _face_weights(rho[l, -1], rho[k, -1]) * S[-1] * coef[-1]
            if not (right.any() or left.any() or boundary_w):
                continue
            Dmat = np.diag(right[:-1], 1) + np.diag(left[1:], -1)
            diag = -(right + left)
            diag[-1] -= boundary_w
            Dmat[np.diag_indices(N)] = diag
            spatial[(l, k)] = Dmat
            dl, dk = materials[l].diffusion, materials[k].diffusion
            energy[(l, k)] = np.diag(dl * dk / (dl + dk))

    density = {l: np.diag(rho[l]) for l in present}
    removal = {l: materials[l].removal for l in present}
    fission = {l: np.outer(library.chi, materials[l].nu_sigma_f) for l in present}
    return OperatorSet(
        spatial, energy, density, removal, fission,
        tuple(m.name for m in materials), (N, G, len(materials)),
    )


def materialize_full_operators(ops, cap=DENSE_CAP):
    """Dense ``T`` and ``F`` with ``T @ phi.ravel() == L(phi).ravel()``.

    Vectorization is row-major (``numpy.ravel``), so ``vec(A phi B)`` is
    ``kron(A, B.T) @ vec(phi)``.
    """
    N, G = ops.n_cells, ops.n_groups
    if N * G > cap:
        raise ResourceLimitError(
            f"dense assembly of size {N * G} exceeds the cap of {cap}"
        )
    return sylvester_matrix(ops.left_pairs()), sylvester_matrix(ops.fission_pairs())
