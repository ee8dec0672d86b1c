import numpy as np

from ..errors import NumericalError


class Node:
    """
    Value recorded on a tape.

    Operations in ``mefnow.grid.ops`` accept nodes and plain arrays interchangeably. Whenever one of the operands is
    a node the result is recorded on that node's tape and returned as a new node.

    """

    __slots__ = ('value', 'tape', 'index', 'name')

    def __init__(self, value, tape, index, name=None):
        self.value = value
        self.tape = tape
        self.index = index
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def dtype(self):
        return self.value.dtype

    def __repr__(self):
        return 'Node(name=' + repr(self.name) + ', shape=' + str(self.value.shape) + ')'


class Tape:
    """
    Ordered record of differentiable operations for reverse-mode differentiation.

    A tape is single-use: ``backward()`` may be called once, after which a new tape must be created for the next
    training step. Tapes are not safe to share between threads.

    """

    def __init__(self):
        self._nodes = []
        self._records = []  # (output index, parent indices, vjp, op name) in execution order
        self._watched = {}
        self._consumed = False

    def __len__(self):
        return len(self._records)

    def watch(self, value, name):
        """Register a leaf (typically a parameter) whose gradient is wanted from ``backward()``."""
        self._check_open()
        if name in self._watched:
            raise ValueError('A value named ' + repr(name) + ' is already watched on this tape')
        node = self._new_node(np.asarray(value), name)
        self._watched[name] = node
        return node

    def record(self, value, parents, vjp, op):
        """
        Record the output of one operation.

        Args:
            value (numpy.ndarray): Output value.
            parents (list): Operands of the operation (nodes or arrays). Gradients flow only into the nodes.
            vjp (callable): Maps the output gradient to a tuple with one gradient (or None) per parent.
            op (str): Operation name, used in diagnostics.

        """
        self._check_open()
        if not np.all(np.isfinite(value)):
            raise NumericalError('Non-finite values produced by ' + op)
        parent_indices = []
        for parent in parents:
            if isinstance(parent, Node):
                if parent.tape is not self:
                    raise ValueError('Operands of ' + op + ' are recorded on different tapes')
                parent_indices.append(parent.index)
            else:
                parent_indices.append(None)
        node = self._new_node(value, None)
        self._records.append((node.index, parent_indices, vjp, op))
        return node

    def backward(self, loss):
        """
        Reverse-mode gradients of a scalar loss with respect to every watched value.

        Returns:
            dict: Gradient by watched name. Values the loss does not depend on receive exact zeros.

        """
        if not isinstance(loss, Node) or loss.tape is not self:
            raise ValueError('Loss was not produced by operations recorded on this tape')
        if loss.value.size != 1:
            raise ValueError('Loss must be a scalar, got shape ' + str(loss.value.shape))
        self._check_open()
        self._consumed = True

        grads = [None] * len(self._nodes)
        grads[loss.index] = np.ones_like(loss.value, dtype=np.float64)
        for output_index, parent_indices, vjp, _ in reversed(self._records):
            output_grad = grads[output_index]
            if output_grad is None:
                continue
            parent_grads = vjp(output_grad)
            for parent_index, parent_grad in zip(parent_indices, parent_grads):
                if parent_index is None or parent_grad is None:
                    continue
                if grads[parent_index] is None:
                    grads[parent_index] = parent_grad
                else:
                    grads[parent_index] = grads[parent_index] + parent_grad

        gradients = {}
        for name, node in self._watched.items():
            grad = grads[node.index]
            if grad is None:
                grad = np.zeros_like(node.value)
            gradients[name] = np.asarray(grad, dtype=node.value.dtype).reshape(node.value.shape)
        return gradients

    def _new_node(self, value, name):
        node = Node(value, self, len(self._nodes), name)
        self._nodes.append(node)
        return node

    def _check_open(self):
        if self._consumed:
            raise RuntimeError('Tape has already been replayed; record a new tape for the next step')


def value_of(x):
    if isinstance(x, Node):
        return x.value
    return np.asarray(x)


def tape_of(*operands):
    """Tape shared by any node among the operands, or None if all operands are plain arrays."""
    tape = None
    for x in operands:
        if isinstance(x, Node):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise ValueError('Operands are recorded on different tapes')
    return tape
