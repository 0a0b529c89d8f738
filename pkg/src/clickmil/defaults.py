"""Default configuration constants for the click-supervision pipeline."""

# Annotator qualification
QUALIFICATION_POLYGONS = 20
QUALIFICATION_THRESHOLD_PX = 20.0  # strict: mean error must be < this

# Batch annotation
BATCH_SIZE = 20
GOLDEN_PER_BATCH = 2
CLICKS_PER_OBJECT = 2

# Click-distance threshold separating two clicks on different instances
D_MAX_PX = 70.0

# MIL protocol
MIL_FOLDS = 10
MIL_ITERATIONS = 10

# Annotation time model (seconds)
SECONDS_PER_CLICK = 1.87
SECONDS_PER_DRAWN_BOX = 34.5

# Suggested pacing shown to annotators (seconds)
SUGGESTED_SECONDS_PER_CLICK = 3.0
