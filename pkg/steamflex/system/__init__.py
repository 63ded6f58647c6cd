"""Physical system parameters, storage thermodynamics and market inputs."""
