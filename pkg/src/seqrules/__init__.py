"""Rule learning from raw sequences."""
