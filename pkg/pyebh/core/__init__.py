from pyebh.core.calibrators import (  # noqa
    AllOrNothing,
    BoundedPoly,
    Calibrator,
    CalibratorCertificate,
    Constant,
    InverseSqrt,
    Power,
    PowerMixture,
    calibrate_vector,
    certify,
    default_calibrator,
    normalize_weights,
    parse_calibrator,
)
from pyebh.core.knockoffs import (  # noqa
    Design,
    KnockoffModel,
    build_knockoffs,
    choose_D,
    gram_residuals,
    load_bundle,
    save_bundle,
    standardize,
    validate_D,
)
from pyebh.core.paired_inference import PairedEvidence, paired_pvalues, sigma_hat, twin_estimators  # noqa
