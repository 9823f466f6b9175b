"""Mixed finite element simulation of acoustic waves in Drude-type metamaterials.

Velocity lives in an H(div) space (RTN or BDM), pressure and the four
auxiliary resonance fields in discontinuous spaces; time stepping is
Crank-Nicolson with a single sparse factorization.
"""
from .assembly import SystemBlocks, assemble_blocks, assemble_div, assemble_mass
from .fespace import FESpace, FEFunction, MixedSpaces, StateVector, interpolate_canonical, project_l2
from .material import MaterialField, energy, validate
from .mesh import Mesh, build_structured, unit_square
from .mms import convergence_study, make_exact
from .postprocess import postprocess_pressure
from .quadrature import quadrature
from .refelem import ElementFamily, make_reference
from .stepper import CNSystem, Forcing, TimeGrid, build_cn_system, initial_state, run, simulate

__version__ = "0.1.0"

__all__ = [
    "CNSystem", "ElementFamily", "FEFunction", "FESpace", "Forcing", "MaterialField", "Mesh",
    "MixedSpaces", "StateVector", "SystemBlocks", "TimeGrid", "assemble_blocks", "assemble_div",
    "assemble_mass", "build_cn_system", "build_structured", "convergence_study", "energy",
    "initial_state", "interpolate_canonical", "make_exact", "make_reference",
    "postprocess_pressure", "project_l2", "quadrature", "run", "simulate", "unit_square",
    "validate",
]
