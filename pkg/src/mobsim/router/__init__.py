from mobsim.router.mcraptor import (
    Bag,
    CriteriaVector,
    FootLeg,
    Label,
    RangeLabel,
    TransitLeg,
    bag_insert,
    dominates,
    journey_is_feasible,
    mcraptor_query,
    mcrange_query,
)
from mobsim.router.road import RoadEdge, RoadGraph, RoadPath, road_route
from mobsim.router.transit import Footpath, Route, Stop, TransitNetwork, TripTimes

__all__ = [
    "Bag",
    "CriteriaVector",
    "FootLeg",
    "Footpath",
    "Label",
    "RangeLabel",
    "RoadEdge",
    "RoadGraph",
    "RoadPath",
    "Route",
    "Stop",
    "TransitLeg",
    "TransitNetwork",
    "TripTimes",
    "bag_insert",
    "dominates",
    "journey_is_feasible",
    "mcraptor_query",
    "mcrange_query",
    "road_route",
]
