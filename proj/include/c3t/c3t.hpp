#pragma once

#include "c3t/bounds.hpp"
#include "c3t/codec.hpp"
#include "c3t/curve.hpp"
#include "c3t/errors.hpp"
#include "c3t/mlp.hpp"
#include "c3t/numeric.hpp"
#include "c3t/parallel.hpp"
#include "c3t/profile.hpp"
#include "c3t/rng.hpp"
#include "c3t/sim.hpp"
#include "c3t/special.hpp"
#include "c3t/spsa.hpp"
#include "c3t/tube.hpp"
