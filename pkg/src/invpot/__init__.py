"""Neural-network reconstruction of a space-dependent potential in a parabolic equation from final-time data."""

__version__ = "0.1.0"
