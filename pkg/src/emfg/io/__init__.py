"""Dataset, sidecar and report files."""
