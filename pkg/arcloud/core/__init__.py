"""核心算法：图像预处理、形态学分析、透视校正、标记解码、模板匹配、形状分类"""
