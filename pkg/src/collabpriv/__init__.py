"""Two-stage concealment of rating profiles for peer-group recommendation."""

__version__ = "0.1.0"

from .core_model import (  # noqa: E402
    Dataset,
    ItemFeatureTable,
    ProfilePoint,
    Rating,
    RatingProfile,
    load_csv,
    load_movielens,
    profile_points,
    split_holdout,
)
from .cta import ConcealedProfile, ConcealmentParams, SessionKey, conceal_local, readout  # noqa: E402
from .evs import ConcealedGroupProfile, GroupProfile, HilbertParams, conceal_global  # noqa: E402
from .hilbert import hilbert_decode, hilbert_encode  # noqa: E402
from .metrics import mae, privacy_vi, variation_of_information  # noqa: E402
from .recommender import ReferralList, item_similarity, predict_rating, recommend  # noqa: E402
from .trust import TrustScore, filter_by_trust, trust_score  # noqa: E402
