#ifndef JSSP_JSSP_HPP
#define JSSP_JSSP_HPP

#include "jssp/rng.hpp"
#include "jssp/instance.hpp"
#include "jssp/env.hpp"
#include "jssp/graph.hpp"
#include "jssp/net.hpp"
#include "jssp/dispatch.hpp"
#include "jssp/policy.hpp"
#include "jssp/oracle.hpp"
#include "jssp/parallel.hpp"
#include "jssp/trainer.hpp"
#include "jssp/harness.hpp"

#endif  // JSSP_JSSP_HPP
