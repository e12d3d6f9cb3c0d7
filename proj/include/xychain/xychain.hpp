// xychain.hpp — umbrella header
#pragma once

#include "xychain/analysis.hpp"
#include "xychain/approximations.hpp"
#include "xychain/bessel.hpp"
#include "xychain/chain_model.hpp"
#include "xychain/ed_oracle.hpp"
#include "xychain/error.hpp"
#include "xychain/exact_dynamics.hpp"
#include "xychain/io.hpp"
#include "xychain/summation.hpp"
#include "xychain/trajectory.hpp"
