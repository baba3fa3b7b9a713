#pragma once

#include "nbchain/chain.hpp"
#include "nbchain/error.hpp"
#include "nbchain/examples.hpp"
#include "nbchain/io.hpp"
#include "nbchain/no_backtrack.hpp"
#include "nbchain/peskun_blocks.hpp"
#include "nbchain/reproduce.hpp"
#include "nbchain/rng.hpp"
#include "nbchain/variance.hpp"
