#pragma once

// Umbrella header.

#include "invnorm/cayley.hpp"
#include "invnorm/enumerate.hpp"
#include "invnorm/finite_group.hpp"
#include "invnorm/generic.hpp"
#include "invnorm/group.hpp"
#include "invnorm/katetov.hpp"
#include "invnorm/lattice.hpp"
#include "invnorm/layers.hpp"
#include "invnorm/norm.hpp"
#include "invnorm/rational.hpp"
#include "invnorm/scheme.hpp"
#include "invnorm/shkarin.hpp"
#include "invnorm/symset.hpp"
#include "invnorm/urysohn.hpp"
