# %% [markdown]
# # One simulated session
#
# A target peer asks for recommendations, a super-peer is elected by
# reputation, every participant checks the service policy against its own
# rules, conceals what it releases and reports trust; the super-peer filters,
# aggregates, conceals globally and forwards the group to the service.

# %%
from collabpriv.protocol_sim import leaked_payloads, random_config, run_session

config = random_config(seed=2, n_peers=7)
transcript = run_session(config)
print(f"groups: {transcript.groups}")
print(f"super-peers: {transcript.super_peers}")
for line in transcript.lines()[:12]:
    print(line)
print("...")
print(f"hash={transcript.hash}")

# %%
for member, score in transcript.trust.items():
    print(f"{member}: trust {score.value:.3f} over {score.co_rated} co-rated items")
for gid, referrals in transcript.referrals.items():
    print(gid, referrals.entries[:5], "sealed to", referrals.sealed_to)
print("raw ratings found in payloads:", leaked_payloads(transcript, config.target))

# %% [markdown]
# Reputation moves towards the reports: super-peers that deliver gain.

# %%
print({p: round(r, 3) for p, r in transcript.reputation.items()})
