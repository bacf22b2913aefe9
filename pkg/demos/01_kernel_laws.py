# coding: utf-8

# # Kernel dimensions of random orthogonal matrices
#
# For g uniform in O(2N, F_ell) we look at dim ker(g - 1).  Small groups can be
# listed outright, so every closed form here is checked against a full count.

# In[1]:

from orthoselmer.distrib import moment, tv_distance
from orthoselmer.kernelmodel import (coset_pgf, enumerated_pgf, moments_closed_form,
                                     rudvalis_shinoda_law, rudvalis_shinoda_limit)

# In[2]:

# O(4, F_3) has 1152 elements; tally their fixed-space dimensions.
law = enumerated_pgf(3, 2).pmf()
for v, p in sorted(law.items()):
    print(v, p)

# The closed formula agrees term for term.
print(law == rudvalis_shinoda_law(3, 2))

# In[3]:

# As N grows the law settles down; P(v = 0) for N = 2, 5, 20 and the limit.
for N in (2, 5, 20):
    print(N, float(rudvalis_shinoda_law(3, N)[0]))
print("limit", rudvalis_shinoda_limit(3, 0))

# In[4]:

# Moments E[ell^(j dim ker)] do not depend on N once j < N.
for j in range(3):
    print(j, moments_closed_form(3, j), enumerated_pgf(3, 3).__call__(3**j))

# In[5]:

# Split by the Dickson invariant the two halves share their first N moments
# but have disjoint supports: kernel dimensions have opposite parities.
H, OH = coset_pgf(3, 3, "H"), coset_pgf(3, 3, "O-H")
print([H(3**j) for j in range(4)])
print([OH(3**j) for j in range(4)])
print(H.parity_support(), OH.parity_support())
