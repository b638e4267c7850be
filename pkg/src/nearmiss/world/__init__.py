from .autopilot import AutopilotParams, autopilot_control, find_leader
from .collision import detect_collisions, obb_corners, obb_overlap
from .mapgraph import Lane, MapGraph, MapSpecError, MAP_VERSION, build_map, map_document_bytes, map_to_document
from .routing import NoRouteError, Route, plan_route, upcoming_waypoints
from .state import EGO_ID, LaneMetrics, WorldState, lane_metrics, spawn_world, write_trace_line
from .vehicle import BicycleParams, VehicleState, step_vehicle

__all__ = [
    "AutopilotParams", "autopilot_control", "find_leader",
    "detect_collisions", "obb_corners", "obb_overlap",
    "Lane", "MapGraph", "MapSpecError", "MAP_VERSION", "build_map",
    "map_document_bytes", "map_to_document",
    "NoRouteError", "Route", "plan_route", "upcoming_waypoints",
    "EGO_ID", "LaneMetrics", "WorldState", "lane_metrics", "spawn_world",
    "write_trace_line",
    "BicycleParams", "VehicleState", "step_vehicle",
]
