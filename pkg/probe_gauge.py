import numpy as np
from slowlight import (
    compose_local_z, depolarized_chi, gauge_fix_local_z, ideal_cz_chi,
    process_fidelity, cptp_residual,
)

cz = ideal_cz_chi()
# pure CZ with an inserted frame advance
meas = compose_local_z(cz, 0.3, -0.7)
print("frame-advanced CZ: F vs cz", process_fidelity(meas, cz))
fixed, angles, f = gauge_fix_local_z(meas)
print("recovered:", angles, "F", f, "| residual", angles[0] + 0.3, angles[1] - 0.7)
print("fixed equals cz:", np.abs(fixed - cz).max(), "cptp", cptp_residual(fixed))

# depolarized gate with the same frame advance
noisy = compose_local_z(depolarized_chi(cz, 0.03), 0.3, -0.7)
fixedn, anglesn, fn = gauge_fix_local_z(noisy)
print("noisy recovered:", anglesn, "F", fn, "target", process_fidelity(depolarized_chi(cz, 0.03), cz))
# composition sanity
back = compose_local_z(compose_local_z(cz, 0.4, -0.2), -0.4, 0.2)
print("composition round trip:", np.abs(back - cz).max())
