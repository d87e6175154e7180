# wavemap core - lattice wave map library
# Layered: constants < grid < dynamics < rattle/initial_data < diagnostics < scaling_fit < evolution < critical_search
