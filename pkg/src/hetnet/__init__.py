"""Two-tier cognitive femtocell network analysis."""
