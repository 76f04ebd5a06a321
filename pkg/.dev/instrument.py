import numpy as np
import scipy.sparse as sp, scipy.sparse.linalg as spla
from centrisk.model import ModelParams
from centrisk import ldp
from centrisk.collocation import _residual, _jacobian, _row_scales, _scaled_norm, _deflated_step

p = ModelParams(h0=0.0, h=0.0, sigma0=0.0, sigma=1.0, theta0=1.0, theta=1.0, n_agents=100)
sol = None
for h0 in [0,1,2,3]:
    sol = ldp.solve_bvp_degenerate(p.with_(h0=h0), 10.0, 2000, initial_guess=sol if sol else "auto")
print("seed at h0=3 ready", flush=True)

params = p.with_(h0=4.0)
rhs, jac = ldp._rhs_degenerate(params)
t = np.linspace(0,10,2000); h=t[1]-t[0]; tm=0.5*(t[:-1]+t[1:])
bcs = ((0,0,-1.0),(0,1,0.0),(-1,0,1.0),(-1,1,0.0))
y = sol.state.copy()
rng = np.random.default_rng(0)
r,(f,ym) = _residual(rhs,t,tm,h,y,bcs)
w = _row_scales(y,bcs,4,2000)
norm = _scaled_norm(r,w)
for it in range(60):
    J = _jacobian(jac,t,tm,h,y,f,ym,bcs)
    lu = spla.splu(J)
    delta = lu.solve(-r).reshape(-1,4).T
    # plain line search
    best=None; alpha=1.0
    while alpha >= 2**-20:
        yt = y+alpha*delta
        rt,ex = _residual(rhs,t,tm,h,yt,bcs)
        nt = _scaled_norm(rt,w)
        if np.isfinite(nt) and nt <= (1-1e-4*alpha)*norm:
            best=(yt,rt,ex,nt,alpha); break
        alpha*=0.5
    used="plain"
    if best is None or best[4] < 0.5:
        step, smin = _deflated_step(J, lu, r, rng, 1e-6)
        if step is not None:
            alpha=1.0
            while alpha >= 2**-20:
                yt = y+alpha*step.reshape(-1,4).T
                rt,ex = _residual(rhs,t,tm,h,yt,bcs)
                nt = _scaled_norm(rt,w)
                if np.isfinite(nt) and nt <= (1-1e-4*alpha)*norm:
                    if best is None or nt < best[3]:
                        best=(yt,rt,ex,nt,alpha); used=f"defl(s={smin:.0e})"
                    break
                alpha*=0.5
    if best is None:
        print(f"it {it}: STALL norm {norm:.3e}"); break
    y,r,(f,ym),norm,alpha = best
    w = _row_scales(y,bcs,4,2000)
    norm = _scaled_norm(r,w)
    print(f"it {it:2d}: {used:14s} alpha {alpha:.4f} norm {norm:.3e}", flush=True)
    if norm < 1e-10:
        print("CONVERGED"); break
