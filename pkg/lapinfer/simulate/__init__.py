# lapinfer/simulate/__init__.py
"""Synthetic populations, time series and Monte-Carlo studies for the network tests."""

from lapinfer.simulate.association import association_covariance, association_mutual_info
from lapinfer.simulate.clt import CLTDiagnostic, WishartLaplacianLaw, clt_diagnostic
from lapinfer.simulate.noise import NoiseSpec, sample_ar_series, sample_gaussian_series
from lapinfer.simulate.study import (
    PowerCurve,
    PowerStudyConfig,
    load_config,
    run_local_global_study,
    run_power_study,
    write_power_curve,
    write_synthetic_cohort,
)
from lapinfer.simulate.topology import (
    MixtureParams,
    TopologySpec,
    build_sigma_from_topology,
    gen_block_adjacency,
    gen_smallworld_adjacency,
    rewire,
)
