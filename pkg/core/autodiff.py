# core/autodiff.py
"""
Diferenciación automática en modo reverso sobre vectores y matrices densas

Todos los valores son matrices float64 de dos dimensiones; los vectores son
columnas (n x 1). Un Tape registra los nodos en orden de creación, que es
también un orden topológico. Los valores se calculan al crear cada nodo y
Tape.backward() acumula gradientes en orden topológico inverso.

Los parámetros viven en un ParameterStore. Las tablas de embeddings se leen
por filas (Tape.parameter(name, row=i)) y sus gradientes se acumulan solo en
las filas usadas.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from utils.exceptions import CheckpointError, CheckpointMismatchError, GraphError, ShapeError
from utils.logger import get_logger

DTYPE = np.float64
CHECKPOINT_HEADER = 'EFTP1'

logger = get_logger(__name__)


class OpKind(Enum):
    """Tipos de operación del grafo"""
    PARAMETER = "parameter"
    CONSTANT = "constant"
    MATMUL = "matmul"
    ADD = "add"
    MUL = "elementwise-mul"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    CONCAT = "concat"
    SUM = "sum-of-list"
    ROW_MAX = "row-max-pool"
    AFFINE = "affine"


LEAF_OPS = (OpKind.PARAMETER, OpKind.CONSTANT)


def as_matrix(value: Union[np.ndarray, Sequence[float], float]) -> np.ndarray:
    """Convertir a matriz float64; los vectores 1-D pasan a columna"""
    array = np.asarray(value, dtype=DTYPE)
    if array.ndim == 0:
        return array.reshape(1, 1)
    if array.ndim == 1:
        return array.reshape(-1, 1)
    if array.ndim != 2:
        raise ShapeError('constant', array.shape, (), 'solo se admiten matrices')
    return array


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Identidad exacta, estable para |x| grandes
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Node:
    """Nodo del grafo de cómputo"""

    __slots__ = ('op', 'inputs', 'value', 'grad', 'requires_grad', 'attrs')

    def __init__(self, op: OpKind, inputs: Tuple['Node', ...], value: np.ndarray,
                 requires_grad: bool, attrs: Optional[dict] = None):
        self.op = op
        self.inputs = inputs
        self.value = value
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.attrs = attrs or {}

    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape

    def __repr__(self):
        return f"Node({self.op.value}, shape={self.shape})"


def _check_shapes(op: OpKind, inputs: Sequence[Node], attrs: dict) -> None:
    """Validar las formas de entrada según el tipo de operación"""
    if op == OpKind.MATMUL:
        a, b = inputs
        if a.shape[1] != b.shape[0]:
            raise ShapeError(op.value, a.shape, b.shape)
    elif op == OpKind.ADD:
        a, b = inputs
        if a.shape != b.shape and not (b.shape == (a.shape[0], 1)):
            raise ShapeError(op.value, a.shape, b.shape)
    elif op == OpKind.MUL:
        a, b = inputs
        if a.shape != b.shape:
            raise ShapeError(op.value, a.shape, b.shape)
    elif op == OpKind.CONCAT:
        axis = attrs['axis']
        other = 1 - axis
        first = inputs[0].shape
        for node in inputs[1:]:
            if node.shape[other] != first[other]:
                raise ShapeError(op.value, first, node.shape, f"axis={axis}")
    elif op == OpKind.SUM:
        shape = attrs['shape']
        for node in inputs:
            if node.shape != shape:
                raise ShapeError(op.value, shape, node.shape)
    elif op == OpKind.ROW_MAX:
        (a,) = inputs
        if a.shape[1] < 1:
            raise ShapeError(op.value, a.shape, (a.shape[0], 1), 'sin columnas')
    elif op == OpKind.AFFINE:
        w, x, b = inputs
        if w.shape[1] != x.shape[0]:
            raise ShapeError(op.value, w.shape, x.shape)
        if b.shape != (w.shape[0], 1):
            raise ShapeError(op.value, (w.shape[0], 1), b.shape, 'sesgo')


def _evaluate(op: OpKind, inputs: Sequence[Node], attrs: dict) -> np.ndarray:
    """Calcular el valor de una operación a partir de los valores de entrada"""
    values = [node.value for node in inputs]
    if op == OpKind.MATMUL:
        return values[0] @ values[1]
    if op == OpKind.ADD:
        return values[0] + values[1]
    if op == OpKind.MUL:
        return values[0] * values[1]
    if op == OpKind.TANH:
        return np.tanh(values[0])
    if op == OpKind.SIGMOID:
        return _sigmoid(values[0])
    if op == OpKind.CONCAT:
        return np.concatenate(values, axis=attrs['axis'])
    if op == OpKind.SUM:
        total = np.zeros(attrs['shape'], dtype=DTYPE)
        for value in values:
            total = total + value
        return total
    if op == OpKind.ROW_MAX:
        return values[0].max(axis=1, keepdims=True)
    if op == OpKind.AFFINE:
        return values[0] @ values[1] + values[2]
    raise GraphError(f"Operación sin evaluación: {op.value}")


def _accumulate(node: Node, grad: np.ndarray) -> None:
    if not node.requires_grad:
        return
    if node.grad is None:
        node.grad = np.array(grad, dtype=DTYPE, copy=True)
    else:
        node.grad = node.grad + grad


def _propagate(node: Node) -> None:
    """Regla de la cadena para un nodo cuyo gradiente ya está completo"""
    g = node.grad
    op = node.op
    ins = node.inputs
    if op == OpKind.MATMUL:
        a, b = ins
        if a.requires_grad:
            _accumulate(a, g @ b.value.T)
        if b.requires_grad:
            _accumulate(b, a.value.T @ g)
    elif op == OpKind.ADD:
        a, b = ins
        _accumulate(a, g)
        if b.requires_grad:
            _accumulate(b, g if b.shape == g.shape else g.sum(axis=1, keepdims=True))
    elif op == OpKind.MUL:
        a, b = ins
        if a.requires_grad:
            _accumulate(a, g * b.value)
        if b.requires_grad:
            _accumulate(b, g * a.value)
    elif op == OpKind.TANH:
        _accumulate(ins[0], g * (1.0 - node.value * node.value))
    elif op == OpKind.SIGMOID:
        _accumulate(ins[0], g * node.value * (1.0 - node.value))
    elif op == OpKind.CONCAT:
        axis = node.attrs['axis']
        offset = 0
        for child in ins:
            size = child.shape[axis]
            if child.requires_grad:
                if axis == 0:
                    _accumulate(child, g[offset:offset + size, :])
                else:
                    _accumulate(child, g[:, offset:offset + size])
            offset += size
    elif op == OpKind.SUM:
        for child in ins:
            _accumulate(child, g)
    elif op == OpKind.ROW_MAX:
        (a,) = ins
        # Empates: gana la primera columna, igual que argmax
        columns = a.value.argmax(axis=1)
        local = np.zeros_like(a.value)
        local[np.arange(a.shape[0]), columns] = g[:, 0]
        _accumulate(a, local)
    elif op == OpKind.AFFINE:
        w, x, b = ins
        if w.requires_grad:
            _accumulate(w, g @ x.value.T)
        if x.requires_grad:
            _accumulate(x, w.value.T @ g)
        if b.requires_grad:
            _accumulate(b, g.sum(axis=1, keepdims=True))


def topological_order(root: Node) -> List[Node]:
    """Nodos alcanzables desde root, entradas antes que consumidores"""
    order: List[Node] = []
    visited = set()
    stack: List[Tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for child in reversed(node.inputs):
            if id(child) not in visited:
                stack.append((child, False))
    return order


def forward(root: Node) -> np.ndarray:
    """
    Recalcular los valores del grafo de root

    Cada nodo interno se evalúa exactamente una vez, en orden topológico.
    Devuelve el valor de root.
    """
    for node in topological_order(root):
        if node.op in LEAF_OPS:
            continue
        _check_shapes(node.op, node.inputs, node.attrs)
        node.value = _evaluate(node.op, node.inputs, node.attrs)
        if not np.isfinite(node.value).all():
            raise GraphError(f"Valor no finito en {node.op.value}")
    return root.value


class ParameterStore:
    """Parámetros con nombre, gradientes acumulados y estado del optimizador"""

    def __init__(self):
        self._params: Dict[str, np.ndarray] = {}
        self._grads: Dict[str, np.ndarray] = {}
        self._row_grads: Dict[str, Dict[int, np.ndarray]] = {}
        self.optimizer_state: Dict[str, Dict[str, float]] = {}
        self.frozen = False

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> List[str]:
        return sorted(self._params)

    def get(self, name: str) -> np.ndarray:
        if name not in self._params:
            raise GraphError(f"Parámetro desconocido: {name}")
        return self._params[name]

    def shape(self, name: str) -> Tuple[int, ...]:
        return self.get(name).shape

    def create(self, name: str, shape: Tuple[int, int], rng: Optional[np.random.Generator] = None,
               init: str = 'glorot', scale: float = 0.01, value: float = 0.0) -> np.ndarray:
        """
        Crear un parámetro nuevo

        Args:
            name: Identificador único
            shape: (filas, columnas)
            rng: Generador para inicializaciones aleatorias
            init: 'glorot', 'uniform' (±scale), 'zeros' o 'constant' (value)
        """
        if name in self._params:
            raise GraphError(f"Parámetro duplicado: {name}")
        rows, cols = shape
        if init == 'zeros':
            array = np.zeros((rows, cols), dtype=DTYPE)
        elif init == 'constant':
            array = np.full((rows, cols), value, dtype=DTYPE)
        else:
            if rng is None:
                raise GraphError(f"Inicialización '{init}' requiere un generador aleatorio")
            if init == 'glorot':
                limit = np.sqrt(6.0 / (rows + cols))
            elif init == 'uniform':
                limit = scale
            else:
                raise GraphError(f"Inicialización desconocida: {init}")
            array = rng.uniform(-limit, limit, size=(rows, cols)).astype(DTYPE)
        self._params[name] = array
        self.optimizer_state[name] = {'updates': 0}
        return array

    def assign(self, name: str, array: np.ndarray) -> None:
        """Reemplazar el contenido de un parámetro sin cambiar su forma"""
        current = self.get(name)
        array = np.asarray(array, dtype=DTYPE)
        if array.shape != current.shape:
            raise CheckpointMismatchError(name, current.shape, array.shape)
        current[...] = array

    def accumulate(self, name: str, grad: np.ndarray, row: Optional[int] = None) -> None:
        """Sumar un gradiente (completo o de una fila)"""
        if row is None:
            if name in self._grads:
                self._grads[name] = self._grads[name] + grad
            else:
                self._grads[name] = np.array(grad, dtype=DTYPE, copy=True)
        else:
            rows = self._row_grads.setdefault(name, {})
            flat = grad.reshape(-1)
            if row in rows:
                rows[row] = rows[row] + flat
            else:
                rows[row] = np.array(flat, dtype=DTYPE, copy=True)

    def gradients(self) -> Iterator[Tuple[str, Optional[int], np.ndarray]]:
        """Gradientes pendientes en orden determinista"""
        for name in sorted(self._grads):
            yield name, None, self._grads[name]
        for name in sorted(self._row_grads):
            rows = self._row_grads[name]
            for row in sorted(rows):
                yield name, row, rows[row]

    def dense_gradient(self, name: str) -> np.ndarray:
        """Gradiente acumulado de un parámetro como matriz completa"""
        dense = np.zeros_like(self.get(name))
        if name in self._grads:
            dense += self._grads[name]
        for row, grad in self._row_grads.get(name, {}).items():
            dense[row] += grad
        return dense

    def zero_grad(self) -> None:
        self._grads.clear()
        self._row_grads.clear()

    def freeze(self) -> None:
        """Marcar como solo lectura (inferencia compartida entre hilos)"""
        self.frozen = True

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: self._params[name].copy() for name in self.names()}

    def load_state(self, arrays: Dict[str, np.ndarray], strict: bool = True) -> None:
        """Cargar valores verificando nombres y formas"""
        for name in self.names():
            if name not in arrays:
                if strict:
                    raise CheckpointError(f"El checkpoint no contiene el parámetro '{name}'")
                continue
            self.assign(name, arrays[name])
        if strict:
            extra = sorted(set(arrays) - set(self._params))
            if extra:
                raise CheckpointError(f"Parámetros desconocidos en el checkpoint: {', '.join(extra)}")


class Tape:
    """Registro de operaciones para un único grafo"""

    def __init__(self, store: Optional[ParameterStore] = None, grad_enabled: bool = True):
        self.store = store
        self.grad_enabled = grad_enabled and not (store is not None and store.frozen)
        self.nodes: List[Node] = []
        self._parameter_nodes: Dict[Tuple[str, Optional[int]], Node] = {}

    def _record(self, op: OpKind, inputs: Tuple[Node, ...], attrs: Optional[dict] = None) -> Node:
        attrs = attrs or {}
        _check_shapes(op, inputs, attrs)
        value = _evaluate(op, inputs, attrs)
        if not np.isfinite(value).all():
            raise GraphError(f"Valor no finito en {op.value}")
        requires_grad = self.grad_enabled and any(node.requires_grad for node in inputs)
        node = Node(op, inputs, value, requires_grad, attrs)
        self.nodes.append(node)
        return node

    @property
    def parameter_names(self) -> List[str]:
        return sorted({name for name, _ in self._parameter_nodes})

    def parameter(self, name: str, row: Optional[int] = None) -> Node:
        """Nodo hoja para un parámetro completo o para una fila de una tabla"""
        if self.store is None:
            raise GraphError("Tape sin ParameterStore")
        key = (name, row)
        if key in self._parameter_nodes:
            return self._parameter_nodes[key]
        array = self.store.get(name)
        if row is None:
            value = array
        else:
            if not 0 <= row < array.shape[0]:
                raise GraphError(f"Fila {row} fuera de rango para '{name}' ({array.shape[0]} filas)")
            value = array[row:row + 1, :].T
        node = Node(OpKind.PARAMETER, (), value, self.grad_enabled, {'name': name, 'row': row})
        self.nodes.append(node)
        self._parameter_nodes[key] = node
        return node

    def constant(self, value, requires_grad: bool = False) -> Node:
        """
        Nodo hoja constante

        Con requires_grad=True el gradiente se calcula y queda en node.grad
        (entradas observadas, p. ej. vectores de contexto de la oración).
        """
        node = Node(OpKind.CONSTANT, (), as_matrix(value), self.grad_enabled and requires_grad)
        self.nodes.append(node)
        return node

    def zeros(self, rows: int, cols: int = 1) -> Node:
        return self.constant(np.zeros((rows, cols), dtype=DTYPE))

    def matmul(self, a: Node, b: Node) -> Node:
        return self._record(OpKind.MATMUL, (a, b))

    def add(self, a: Node, b: Node) -> Node:
        """Suma; b puede ser una columna que se difunde sobre las columnas de a"""
        return self._record(OpKind.ADD, (a, b))

    def mul(self, a: Node, b: Node) -> Node:
        return self._record(OpKind.MUL, (a, b))

    def tanh(self, a: Node) -> Node:
        return self._record(OpKind.TANH, (a,))

    def sigmoid(self, a: Node) -> Node:
        return self._record(OpKind.SIGMOID, (a,))

    def concat(self, nodes: Sequence[Node], axis: int = 0) -> Node:
        if not nodes:
            raise GraphError("concat de una lista vacía")
        if len(nodes) == 1:
            return nodes[0]
        return self._record(OpKind.CONCAT, tuple(nodes), {'axis': axis})

    def sum(self, nodes: Sequence[Node], shape: Tuple[int, int]) -> Node:
        """Suma de una lista; la lista vacía da el vector cero de la forma declarada"""
        return self._record(OpKind.SUM, tuple(nodes), {'shape': tuple(shape)})

    def row_max(self, a: Node) -> Node:
        return self._record(OpKind.ROW_MAX, (a,))

    def affine(self, w: Node, x: Node, b: Node) -> Node:
        """W x + b, con b difundido sobre las columnas de x"""
        return self._record(OpKind.AFFINE, (w, x, b))

    def backward(self, loss: Node) -> None:
        """
        Propagar gradientes desde una pérdida escalar

        Los gradientes de los parámetros se suman en el ParameterStore.
        """
        if loss.value is None:
            raise GraphError("backward antes de forward")
        if loss.shape != (1, 1):
            raise GraphError(f"La pérdida debe ser escalar (1x1), forma recibida {loss.shape}")
        if not loss.requires_grad:
            return

        order = topological_order(loss)
        for node in order:
            node.grad = None
        loss.grad = np.ones((1, 1), dtype=DTYPE)

        for node in reversed(order):
            if node.grad is None or node.op in LEAF_OPS:
                continue
            _propagate(node)

        for node in order:
            if node.op == OpKind.PARAMETER and node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.value)
                self.store.accumulate(node.attrs['name'], node.grad, node.attrs['row'])


class SGD:
    """Descenso por gradiente con tasa fija y recorte opcional por norma L2"""

    def __init__(self, store: ParameterStore, learning_rate: float, clip_norm: Optional[float] = 5.0):
        self.store = store
        self.learning_rate = learning_rate
        self.clip_norm = clip_norm

    def step(self) -> float:
        """Aplicar y limpiar los gradientes pendientes; devuelve la norma antes del recorte"""
        grads = list(self.store.gradients())
        if not grads:
            return 0.0

        norm = float(np.sqrt(sum(float(np.sum(g * g)) for _, _, g in grads)))
        scale = 1.0
        if self.clip_norm and norm > self.clip_norm:
            scale = self.clip_norm / norm

        rate = self.learning_rate * scale
        touched = set()
        for name, row, grad in grads:
            param = self.store.get(name)
            if row is None:
                param -= rate * grad
            else:
                param[row] -= rate * grad
            touched.add(name)

        for name in touched:
            self.store.optimizer_state[name]['updates'] += 1

        self.store.zero_grad()
        return norm


def gradient_check(builder: Callable[[Tape], Node], params: ParameterStore,
                   epsilon: float = 1e-5) -> float:
    """
    Comparar gradientes analíticos con diferencias centrales

    Args:
        builder: Reconstruye la misma pérdida escalar desde params en un Tape nuevo
        params: Parámetros a perturbar
        epsilon: Paso de la diferencia central

    Returns:
        Máximo de |analítico - numérico| / max(1e-8, |analítico| + |numérico|)
    """
    first_tape = Tape(params)
    loss = builder(first_tape)
    first_value = forward(loss).copy()
    second_value = forward(builder(Tape(params)))
    if not np.array_equal(first_value, second_value):
        raise GraphError("El constructor no es determinista: dos evaluaciones difieren")

    used = first_tape.parameter_names
    if not used:
        raise GraphError("El grafo no contiene parámetros: nada que verificar")

    params.zero_grad()
    first_tape.backward(loss)

    # Parámetros fuera del grafo tienen gradiente nulo por ambos métodos
    rows_used: Dict[str, Optional[set]] = {}
    for name, row in first_tape._parameter_nodes:
        if row is None:
            rows_used[name] = None
        elif name not in rows_used:
            rows_used[name] = {row}
        elif rows_used[name] is not None:
            rows_used[name].add(row)

    def evaluate() -> float:
        return float(forward(builder(Tape(params, grad_enabled=False)))[0, 0])

    worst = 0.0
    for name in used:
        analytic = params.dense_gradient(name)
        array = params.get(name)
        rows = rows_used.get(name)
        indices: Iterable[Tuple[int, ...]]
        if rows is None:
            indices = np.ndindex(array.shape)
        else:
            indices = ((r, c) for r in sorted(rows) for c in range(array.shape[1]))
        for index in indices:
            original = array[index]
            array[index] = original + epsilon
            plus = evaluate()
            array[index] = original - epsilon
            minus = evaluate()
            array[index] = original
            numeric = (plus - minus) / (2.0 * epsilon)
            exact = analytic[index]
            error = abs(exact - numeric) / max(1e-8, abs(exact) + abs(numeric))
            worst = max(worst, error)

    params.zero_grad()
    return worst


def save_checkpoint(store: ParameterStore, path: Union[str, Path]) -> Path:
    """
    Guardar parámetros en formato EFTP1

    Línea 1: cabecera; línea 2: índice JSON (nombre, forma, desplazamiento);
    luego los valores float64 little-endian en orden de filas.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    index = []
    payload = []
    offset = 0
    for name in store.names():
        array = np.ascontiguousarray(store.get(name), dtype='<f8')
        index.append({'name': name, 'shape': list(array.shape), 'offset': offset})
        payload.append(array.tobytes())
        offset += array.size
    with open(path, 'wb') as f:
        f.write((CHECKPOINT_HEADER + '\n').encode('ascii'))
        f.write((json.dumps(index, separators=(',', ':')) + '\n').encode('utf-8'))
        for chunk in payload:
            f.write(chunk)
    logger.debug(f"Checkpoint guardado: {path} ({len(index)} parámetros)")
    return path


def load_checkpoint(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """Leer un checkpoint EFTP1 como diccionario nombre -> matriz"""
    path = Path(path)
    try:
        with open(path, 'rb') as f:
            header = f.readline().decode('ascii', errors='replace').rstrip('\n')
            index_line = f.readline()
            payload = f.read()
    except OSError as e:
        raise CheckpointError(f"No se puede leer el checkpoint {path}: {e}")

    if header != CHECKPOINT_HEADER:
        raise CheckpointError(f"Cabecera de checkpoint inválida en {path}: {header!r}")
    try:
        index = json.loads(index_line.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Índice de checkpoint inválido en {path}: {e}")

    if len(payload) % 8:
        raise CheckpointError(f"Checkpoint con {len(payload)} bytes de datos en {path}: "
                              f"no es múltiplo de 8")
    if not isinstance(index, list):
        raise CheckpointError(f"Índice de checkpoint inválido en {path}: se esperaba una lista")
    values = np.frombuffer(payload, dtype='<f8')
    arrays: Dict[str, np.ndarray] = {}
    expected = 0
    for entry in index:
        if not isinstance(entry, dict) or not {'name', 'shape', 'offset'} <= entry.keys():
            raise CheckpointError(f"Entrada de índice incompleta en {path}: {entry!r}")
        try:
            shape = tuple(int(dim) for dim in entry['shape'])
            start = int(entry['offset'])
        except (TypeError, ValueError):
            raise CheckpointError(f"Entrada de índice inválida en {path}: {entry!r}")
        size = int(np.prod(shape))
        if start < 0 or any(dim < 0 for dim in shape) or start + size > values.size:
            raise CheckpointError(f"Checkpoint truncado en {path}: falta '{entry['name']}'")
        arrays[entry['name']] = values[start:start + size].reshape(shape).astype(DTYPE)
        expected += size
    if expected != values.size:
        raise CheckpointError(f"Checkpoint con datos sobrantes en {path}")
    return arrays
