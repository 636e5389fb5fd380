"""Scratch probe: scenario sanity + single-agent learning curve + timing."""
import time

import numpy as np

from fedpart.agent import DQNAgent, ValidationProbe
from fedpart.baseline import run_baseline
from fedpart.config import ExperimentConfig
from fedpart.env import oracle_best_config, total_latency_ms
from fedpart.runner import AgentBuilder, build_scenario, make_env

cfg = ExperimentConfig()
sc = build_scenario(cfg)
prof = sc.profile

print("== profile ==")
for label, idx in [("full-sew", 0), ("full-phone", 1), ("full-cloud", 2)]:
    c = prof.configs[idx]
    print(f"{label}: t1={c.t1:.0f} t2={c.t2:.0f} t3={c.t3:.0f} d12={c.delta12:.2f} d23={c.delta23:.2f}")
print("wifi trace mean/min/max:", sc.wifi_trace.samples.mean().round(1),
      sc.wifi_trace.samples.min().round(1), sc.wifi_trace.samples.max().round(1))
print("5g   trace mean/min/max:", sc.fiveg_trace.samples.mean().round(1),
      sc.fiveg_trace.samples.min().round(1), sc.fiveg_trace.samples.max().round(1))

# latency of full-cloud at typical throughputs
c = prof.configs[2]
for rw, r5 in [(180, 24), (180, 10), (60, 24), (180, 50)]:
    print(f"full-cloud latency @wifi={rw},5g={r5}: {total_latency_ms(c, rw, r5, c.t3):.0f} ms")

# oracle and baselines as references
env = make_env(sc, np.random.SeedSequence(99))
log_e = run_baseline(make_env(sc, np.random.SeedSequence(99)), "energy", 900)
log_l = run_baseline(make_env(sc, np.random.SeedSequence(99)), "latency", 900)
print("baseline energy violation rate:", np.mean(log_e["violated"]).round(3),
      " chosen config ids:", np.unique(log_e["config_id"])[:12])
print("baseline latency violation rate:", np.mean(log_l["violated"]).round(3),
      " chosen config ids:", np.unique(log_l["config_id"])[:12])

# oracle policy violation rate (clairvoyant-ish: picks per observed state, then env moves)
env = make_env(sc, np.random.SeedSequence(99))
viol = 0
for _ in range(900):
    a = oracle_best_config(prof, sc.devices, env.weights, sc.bounds, env.state.r_wifi, env.state.r_5g)
    out = env.step(a)
    viol += out.violated
print("oracle-replay violation rate:", viol / 900)

# single agent training with timing
builder = AgentBuilder(sc, cfg.agent.to_settings(), validation_interval=250, validation_steps=300)
agent = builder.build(0, np.random.SeedSequence(42))
t0 = time.perf_counter()
agent.run_training_phase(1500)
t1 = time.perf_counter()
print(f"1500 steps (incl warmup) in {t1-t0:.1f}s -> {(t1-t0)/1500*1000:.2f} ms/step")
agent.run_training_phase(3000)
t2 = time.perf_counter()
print(f"3000 more steps in {t2-t1:.1f}s -> {(t2-t1)/3000*1000:.2f} ms/step")
v = agent.validation
print("validation curve (steps, rate):", list(zip(v.steps_trained, [round(r, 3) for r in v.rates])))
ma = np.mean(np.asarray(agent.violations[-1000:]))
print("training MA(last 1000):", round(float(ma), 3))
acts = np.asarray(agent.actions[-1000:])
print("last-1000 actions: keep%%=%.2f distinct=%d" % (np.mean(acts == prof.n_configs), len(np.unique(acts))))
