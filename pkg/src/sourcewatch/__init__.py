"""sourcewatch: gamma flaw-detector radiation-source monitoring, desk scale.

Device-side hazard judgment and power management, a simulated NB-IoT
uplink/downlink channel, and a cloud monitoring platform with an
operator API.
"""

__version__ = "0.1.0"
