"""Massive MIMO baseband co-design toolkit.

Fixed-point numerics, channel models, centralized and decentralized
equalization, front-end impairment models, hardware cost accounting, and
a coded link-level simulator, tied together by the ``mimodsp`` CLI.
"""
from . import (channel, complexity, decentral, equalization, impairments,
               link, numerics)
from .channel import (diag_dominance, draw_iid_rayleigh, draw_los_ula,
                      estimate_ls, gram, hardening_variance, load_realizations,
                      rx_power, save_realizations, stream_rng)
from .complexity import (AlgoCost, adc_power, adder_area, dac_fom,
                         dynamic_power, exact_inverse_cost, filter_area,
                         multiplier_area, table2_cost, total_cost)
from .decentral import (GroupPartition, InterconnectConfig, aggregate_gram,
                        aggregate_mf, centralized_link_load, group_link_load,
                        interconnect_rate, local_gram, local_mf, partition,
                        split_rows)
from .equalization import (LinearCombiner, MqrdDetection, NsaConfig,
                           NsaDivergenceWarning, UplinkDetector, WnsaConfig,
                           apply_precoder, build_uplink_detector, cd_detect,
                           chd_detect, combiner_exact, fit_wnsa_weights,
                           mqrd_detect, nsa_inverse, post_combining_sinr,
                           precode, wnsa_inverse)
from .impairments import (CircuitErrorModel, FrontEndSet, PaModel,
                          build_nonreciprocal, calibrate, draw_front_end_set,
                          draw_victims, evm_db, exclude_antennas,
                          inject_errors, mui_db, pa_apply,
                          per_antenna_sddr_db, quantize_adc, sddr_db)
from .link import (BerResult, Constellation, ConvCode, SimConfig, conv_encode,
                   demap_hard, demap_soft, map_bits, run_downlink_evm,
                   run_outage_study, run_uplink_ber, snr_at_ber,
                   viterbi_decode)
from .numerics import (FixedPointFormat, FxpOverlay, GivensRotation,
                       NonPositivePivotError, ZeroDiagonalError,
                       back_substitute, cholesky, forward_substitute,
                       fxp_quantize, givens_exact, givens_modified, qrd)

__version__ = "0.1.0"
