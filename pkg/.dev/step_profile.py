import time
import numpy as np
from centrisk.model import ModelParams
from centrisk import ldp

p = ModelParams(h0=0.0, h=0.0, sigma0=0.0, sigma=1.0, theta0=1.0, theta=1.0, n_agents=100)
sol = None
for h0 in [0,1,2,3,4,5,6,7,8,9,10]:
    t0 = time.time()
    try:
        sol_new = ldp.solve_bvp_degenerate(p.with_(h0=h0), 10.0, 2000,
                                           initial_guess=sol if sol else "auto")
        print(f"h0={h0}: OK iters {sol_new.newton_iterations} rate {sol_new.rate_value:.4f} time {time.time()-t0:.1f}s", flush=True)
        sol = sol_new
    except Exception as e:
        print(f"h0={h0}: FAIL after {time.time()-t0:.1f}s ({str(e)[:60]})", flush=True)
        break
