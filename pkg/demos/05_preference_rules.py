# %% [markdown]
# # Preference rules and query rewriting
#
# Rules are plain text.  Decision rules (release or block) are matched
# against the service's declared policy; the remaining actions reshape what
# a participant is willing to release.

# %%
import datetime as dt

from collabpriv.core_model import ItemFeatureTable, RatingProfile
from collabpriv.policy import AuditLog, AuditRecord, Request, ServicePolicy, check_policy, parse_rules, rewrite_query

rules = parse_rules("""
IF purpose=marketing THEN block
IF recipients=third_parties THEN conceal=strict
SUPPRESS item:3
GENERALIZE "heavy metal"->"rock"
DUMMY on
""")
features = ItemFeatureTable({1: [1, 0], 2: [0, 1], 3: [1, 1], 4: [0, 1]}, names=["rock", "heavy metal"])
profile = RatingProfile("alice", {1: 5, 2: 4, 3: 1, 4: 2})

for policy in (ServicePolicy("marketing"), ServicePolicy("recommendation", "third_parties")):
    print(policy.purpose.value, policy.recipients.value, "->", check_policy(policy, rules))

# %%
res = rewrite_query(Request("bob"), profile, features, rules, policy=ServicePolicy(), seed=1)
print("kept", res.kept)
print("suppressed", res.suppressed, "dummies", {k: (v.tolist(), r) for k, (v, r) in res.dummies.items()})
print("tags", res.tags)

# %% [markdown]
# The audit stops one requester from collecting most of a profile piecemeal.

# %%
log = AuditLog()
day = dt.date(2026, 5, 1)
for n, items in enumerate([{1}, {2}, {4}]):
    print(log.audit("alice", AuditRecord("bob", frozenset(items), day + dt.timedelta(days=n)), len(profile)))
