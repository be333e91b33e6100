"""Solar geometry, psychrometrics and the multizone RC building model."""
