import numpy as np
import scipy.sparse as sp, scipy.sparse.linalg as spla
from centrisk.model import ModelParams
from centrisk import ldp
from centrisk.collocation import _residual, _jacobian, _row_scales, _scaled_norm, _deflated_step

def line_search(y, step, phi, rhs, t, tm, h, bcs):
    alpha = 1.0
    while alpha >= 2**-20:
        yt = y + alpha*step.reshape(-1,4).T
        rt, ex = _residual(rhs,t,tm,h,yt,bcs)
        pt = np.linalg.norm(rt)
        if np.isfinite(pt) and pt <= (1-1e-4*alpha)*phi:
            return yt, rt, ex, pt, alpha
        alpha *= 0.5
    return None

def solve(params, seed_state, label, max_iter=120):
    rhs, jac = ldp._rhs_degenerate(params)
    t = np.linspace(0,10,2000); h=t[1]-t[0]; tm=0.5*(t[:-1]+t[1:])
    bcs = ((0,0,-1.0),(0,1,0.0),(-1,0,1.0),(-1,1,0.0))
    y = seed_state.copy(); rng = np.random.default_rng(0)
    r,(f,ym) = _residual(rhs,t,tm,h,y,bcs)
    phi = np.linalg.norm(r)
    ndefl = 0
    for it in range(max_iter):
        w = _row_scales(y,bcs,4,2000)
        if _scaled_norm(r,w) < 1e-10:
            print(f"{label}: CONVERGED in {it} iters ({ndefl} deflated)", flush=True)
            return y
        J = _jacobian(jac,t,tm,h,y,f,ym,bcs)
        lu = spla.splu(J)
        best = line_search(y, lu.solve(-r), phi, rhs, t, tm, h, bcs)
        if best is None or best[4] < 0.5 or best[3] > 0.9*phi:
            step, smin = _deflated_step(J, lu, r, rng, 1e-6)
            if step is not None:
                alt = line_search(y, step, phi, rhs, t, tm, h, bcs)
                if alt is not None and (best is None or alt[3] < best[3]):
                    best = alt; ndefl += 1
        if best is None:
            print(f"{label}: STALL it {it} phi {phi:.3e}", flush=True); return None
        y,r,(f,ym),phi,alpha = best
    print(f"{label}: max_iter, phi {phi:.3e} scaled {_scaled_norm(r,_row_scales(y,bcs,4,2000)):.2e}", flush=True)
    return None

p = ModelParams(h0=0.0, h=0.0, sigma0=0.0, sigma=1.0, theta0=1.0, theta=1.0, n_agents=100)
sol = ldp.solve_bvp_degenerate(p, 10.0, 2000, initial_guess="line")
state = sol.state
import time
t00=time.time()
for h0 in [1,2,3,4,5,6,7,8,9,10]:
    t0=time.time()
    state = solve(p.with_(h0=h0), state, f"h0={h0}")
    print(f"   [{time.time()-t0:.1f}s]", flush=True)
    if state is None: break
print(f"total {time.time()-t00:.1f}s")
