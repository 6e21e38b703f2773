"""Group-averaged second-order estimation."""
