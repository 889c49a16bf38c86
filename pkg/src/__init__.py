# Vectoring Simulator - Source Package
