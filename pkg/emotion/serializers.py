from rest_framework import serializers

from .ingest import EmotionLabel


class CommaSeparatedListField(serializers.ListField):
    """ListField that also accepts the config file's ``a, b, c`` form."""

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [part.strip() for part in data.split(",") if part.strip()]
        return super().to_internal_value(data)


class RunConfigSerializer(serializers.Serializer):
    # root seed and paths
    seed = serializers.IntegerField(default=42, min_value=0)
    workdir = serializers.CharField(default=".")
    raw_dir = serializers.CharField(default="raw")
    clean_dir = serializers.CharField(default="clean")

    # synthesis
    sample_rate_hz = serializers.FloatField(default=120.0, min_value=1.0, max_value=1000.0)
    duration_s = serializers.FloatField(default=600.0, min_value=0.0)
    noise_sigma_mm = serializers.FloatField(default=0.05, min_value=0.0)
    drift_sigma_mm = serializers.FloatField(default=0.2, min_value=0.0)
    drift_tau_s = serializers.FloatField(default=30.0, min_value=0.01)
    blink_rate_per_min = serializers.FloatField(default=15.0, min_value=0.0)
    blink_min_ms = serializers.FloatField(default=100.0, min_value=0.0)
    blink_max_ms = serializers.FloatField(default=300.0, min_value=0.0)
    one_eye_dropout_prob = serializers.FloatField(default=0.002, min_value=0.0, max_value=1.0)

    # preprocessing and windows
    blink_margin = serializers.IntegerField(default=0, min_value=0)
    window_s = serializers.FloatField(default=5.0)
    hop_s = serializers.FloatField(default=2.5)
    min_fill = serializers.FloatField(default=0.8)
    welch_seg_len = serializers.IntegerField(default=256, min_value=2)
    welch_overlap = serializers.FloatField(default=0.5, min_value=0.0, max_value=0.99)

    # selection
    mrmr_k = serializers.IntegerField(default=51, min_value=1)
    mrmr_bins = serializers.IntegerField(default=10, min_value=2)

    # boosting
    max_depth = serializers.IntegerField(default=5, min_value=0)
    learning_rate = serializers.FloatField(default=0.05, min_value=0.0, max_value=1.0)
    n_estimators = serializers.IntegerField(default=20, min_value=1)
    max_features = serializers.IntegerField(default=7, min_value=1)
    min_samples_split = serializers.IntegerField(default=200, min_value=2)
    min_samples_leaf = serializers.IntegerField(default=30, min_value=1)
    subsample = serializers.FloatField(default=0.8, min_value=0.0, max_value=1.0)
    gbm_seed = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=0)
    grid_learning_rate = CommaSeparatedListField(
        child=serializers.FloatField(min_value=0.0, max_value=1.0), default=lambda: [0.05, 0.051], allow_empty=True
    )
    grid_max_depth = CommaSeparatedListField(
        child=serializers.IntegerField(min_value=0), default=lambda: [3, 5], allow_empty=True
    )

    # evaluation
    train_fraction = serializers.FloatField(default=0.7)
    stratified = serializers.BooleanField(default=True)
    paper_faithful_selection = serializers.BooleanField(default=False)
    stage_select_rule = serializers.ChoiceField(choices=["mse", "deviance"], default="mse")
    top_features = serializers.IntegerField(default=30, min_value=1)

    def validate(self, attrs):
        errors = {}
        if not 0 < attrs["hop_s"] <= attrs["window_s"]:
            errors["hop_s"] = "need 0 < hop_s <= window_s"
        if not 0 < attrs["min_fill"] <= 1:
            errors["min_fill"] = "must lie in (0, 1]"
        if not 0 < attrs["train_fraction"] < 1:
            errors["train_fraction"] = "must lie in (0, 1)"
        if attrs["blink_max_ms"] < attrs["blink_min_ms"]:
            errors["blink_max_ms"] = "must be >= blink_min_ms"
        if attrs["min_samples_split"] < 2 * attrs["min_samples_leaf"]:
            errors["min_samples_split"] = "must be >= 2 * min_samples_leaf"
        if errors:
            raise serializers.ValidationError(errors)
        return attrs


class CleanManifestEntrySerializer(serializers.Serializer):
    source_name = serializers.CharField()
    file = serializers.CharField()
    label = serializers.ChoiceField(choices=EmotionLabel.tokens())
    sample_rate_hz = serializers.FloatField(min_value=0.0)
    kept = serializers.IntegerField(min_value=0)
    dropped = serializers.IntegerField(min_value=0)


class HyperparamsSerializer(serializers.Serializer):
    max_depth = serializers.IntegerField(min_value=0)
    learning_rate = serializers.FloatField(min_value=0.0, max_value=1.0)
    n_estimators = serializers.IntegerField(min_value=0)
    max_features = serializers.IntegerField(min_value=1)
    min_samples_split = serializers.IntegerField(min_value=2)
    min_samples_leaf = serializers.IntegerField(min_value=1)
    subsample = serializers.FloatField(min_value=0.0, max_value=1.0)
    seed = serializers.IntegerField(min_value=0)


# model.json header; the tree records are checked while they are rebuilt
class ModelDocumentSerializer(serializers.Serializer):
    format = serializers.ChoiceField(choices=["pupil-gbm"])
    version = serializers.ChoiceField(choices=[1])
    label_order = serializers.ListField(child=serializers.CharField())
    catalog_fingerprint = serializers.CharField()
    feature_names = serializers.ListField(child=serializers.CharField(), allow_empty=False)
    hyperparams = HyperparamsSerializer()
    learning_rate = serializers.FloatField(min_value=0.0, max_value=1.0)
    priors = serializers.ListField(child=serializers.FloatField(), min_length=4, max_length=4)
    train_deviance = serializers.ListField(child=serializers.FloatField(), required=False, default=list)

    def validate_label_order(self, value):
        if value != EmotionLabel.tokens():
            raise serializers.ValidationError(f"expected {EmotionLabel.tokens()}")
        return value
