"""M|G|oo busy periods, service-tail diagnostics and infinite-server network sojourns."""

__version__ = "0.1.0"
