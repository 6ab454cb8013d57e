"""Room acoustics: geometry, simulation, signal processing and analysis."""
