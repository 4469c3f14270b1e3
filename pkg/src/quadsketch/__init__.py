"""Randomized sketches of graph Laplacians, SDD and PSD matrices that answer
cut and spectral quadratic-form queries to 1 +/- eps relative accuracy with
constant per-query success probability, plus a simulated distributed
minimum-cut protocol built from those sketches."""

__version__ = "0.1.0"

from .errors import (
    GraphFormatError,
    QuadsketchError,
    SketchConsistencyError,
    TooLargeError,
)
from .graph import (
    DirectedGraph,
    WeightedGraph,
    cheeger_exact,
    conductance,
    connected_components,
    cut_weight,
    degrees,
    expansion_exact,
    load_graph,
    parse_graph,
    quadratic_form,
    save_graph,
)
from .sparsify import SparsifierConfig, sparsify
from .partition import (
    DegreeClassPartition,
    PartitionResult,
    assign_direction,
    cut_preprocessing,
    degree_class_partition,
    find_sparse_cut,
    spectral_preprocessing,
)
from .cutsketch import (
    CutSketchGeneral,
    CutSketchPoly,
    QueryResult,
    S1Sketch,
    amplified_estimate,
    cut_basic_build,
    cut_basic_estimate,
    cut_s1_build,
    cut_s1_estimate,
    cut_sketch_build,
    cut_sketch_estimate,
    mst_max,
)
from .spectral import (
    S2Sketch,
    S3Sketch,
    SpectralBasicSketch,
    SpectralImprovedSketch,
    spectral_basic_build,
    spectral_basic_estimate,
    spectral_improved_build,
    spectral_improved_estimate,
    spectral_s2_build,
    spectral_s2_estimate,
    spectral_s3_build,
    spectral_s3_estimate,
)
from .psdsdd import (
    JlSketch,
    SddSketch,
    jl_build,
    jl_estimate,
    sdd_sketch_build,
    sdd_sketch_estimate,
    sdd_to_laplacian,
)
from .oracle import (
    OracleReport,
    estimator_expectation_exhaustive,
    lambda1_normalized,
    min_cut_exact,
)
from .distmincut import (
    ProtocolTranscript,
    ServerShare,
    partition_edges,
    run_protocol,
)
