# coding: utf-8

# # Two routes to the same random Selmer-type group
#
# Route one intersects two random maximal isotropic summands of a split
# quadratic module over Z/ell^e.  Route two takes ker(g - 1) for g drawn from a
# fixed coset of the orthogonal group over Z/n.  Both should give the same
# joint law of (rank bit, group).

# In[1]:

import numpy as np

from orthoselmer.bklpr import alternating_distribution, intersection_distribution
from orthoselmer.distrib import compare_models
from orthoselmer.kernelmodel import KernelDistParams, kernel_distribution
from orthoselmer.markov import verify_markov
from orthoselmer.orthogroup import CosetSpec

SAMPLES = 4000

# In[2]:

inter, chains = intersection_distribution(m=10, ell=3, e=2, count=SAMPLES, seed=1)
print(inter)

# In[3]:

# The kernel model mod 9 with d = 2 (ambient rank 20) on the coset fixed by [5].
params = KernelDistParams(9, d=2, coset=CosetSpec.from_height(2, 5, 9), mode="mc",
                          samples=SAMPLES, seed=2, joint=True)
kern = kernel_distribution(params)
rep = compare_models(inter, kern)
print("tv", round(rep["tv"], 4), "noise bound", round(rep["tolerance"], 4))

# In[4]:

# Dimensions d_j of S[ell^j]/S[ell^(j-1)] step down like coranks of random
# alternating forms.
print(verify_markov(chains, 3)["pass"])

# In[5]:

# Drop the rank-one part and the torsion is the alternating-matrix model.
tors = alternating_distribution(m=10, r=0, ell=3, e=2, count=SAMPLES, seed=3)
print(tors)

# In[6]:

# The rank bit is a fair coin.
ranks = inter.pushforward(lambda k: k[0])
print(float(ranks.prob(1)), 0.5 / np.sqrt(ranks.total))
