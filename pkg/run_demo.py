from busyq.analysis.busy_transform import BusyTransform, mean_busy
from busyq.analysis.distributions import QueueModel
from busyq.analysis.moments import busy_moments
from busyq.analysis.network import NetworkModel, SojournTransform, sojourn_moments
import dotenv
dotenv.load_dotenv()

if __name__ == "__main__":
    queue = QueueModel.model_validate({"lambda": 1.0, "service": {"kind": "constant", "alpha": 1.0}})
    print("mean busy:", mean_busy(queue))
    print("B(1):", BusyTransform(queue).eval(1.0).real)
    print("E[B^n], n=1..3:", busy_moments(queue, 3))

    svc = {"kind": "exponential", "rate": 1.0}
    tandem = NetworkModel.model_validate({
        "nodes": [{"lambda": 1.0, "service": svc}, {"lambda": 0.0, "service": svc}],
        "routing": [[0.0, 1.0], [0.0, 0.0]],
    })
    print("tandem sojourn:", sojourn_moments(SojournTransform(tandem)))
