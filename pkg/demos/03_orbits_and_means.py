# coding: utf-8

# # Orbit counts and average kernel sizes
#
# Burnside's lemma turns E[|ker(g - 1)|^j] into a count of orbits on tuples
# of vectors, which can also be counted directly.

# In[1]:

from orthoselmer.kernelmodel import (burnside_orbit_count, moments_closed_form,
                                     orbit_count_product, orbit_count_recursive,
                                     orbit_count_table, product_mean_enumerated)
from orthoselmer.orthogroup import BOTH, CosetSpec

# In[2]:

# Orbits of O(6, F_3) on pairs of vectors, by averaging fixed points...
print(burnside_orbit_count(3, 3, 2, "O"))
# ...and from the recursive table f(n, i), orbits whose span has dimension i.
print(orbit_count_table(3, 2)[-1], orbit_count_recursive(3, 2), orbit_count_product(3, 2))
# Either way it is the second moment.
print(moments_closed_form(3, 2))

# In[3]:

# SO(4) has one orbit more than O(4) on pairs in the plane of a split form.
print(burnside_orbit_count(3, 2, 2, "SO") - burnside_orbit_count(3, 2, 2, "O"))

# In[4]:

# Over Z/15 the mean kernel size on a spinor coset is the divisor sum
# 1 + 3 + 5 + 15 = 24, checked by looping over every pair in O(4, F_3) x O(4, F_5).
mean, size = product_mean_enumerated(2, (3, 5), CosetSpec(BOTH, ((3, 0), (5, 1))))
print(mean, size)
