"""Mild-function calculus, jet arithmetic and C^r reparametrization checks."""
from .jets import Jet, jet_add, jet_compose, jet_exp, jet_monomial, jet_mul, jet_reciprocal
from .expr import from_json, jet_eval_expr
from .multiindex import PartitionTerm, enumerate_partitions, faa_di_bruno, lex_precedes
from .mildness import (MildParams, VerificationReport, lemma_ab_brute_force, lemma_ab_closed_form,
                       mild_compose, mild_product, mild_sum, verify_certificate)
from .geometry import (BoundedMonomial, Cell, PreparedFunction, Scene, SceneError, Unit, load_scene,
                       prepared_jet)
from .substitution import NaiveCellMap, PhiInf, PhiR, PowerMap, phi_jet
from .charts import Chart, make_charts, subdivision_factor
from .diophantine import (RationalPoint, c2_exponent, degree_bound, enumerate_points, height,
                          hypersurface_cover)

__version__ = "0.1.0"
